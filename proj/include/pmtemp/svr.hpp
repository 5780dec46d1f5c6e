#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace pmtemp {

struct SvrParams {
  double C = 1.0;
  double epsilon = 0.1;
  /// RBF bandwidth; <= 0 selects 1 / (p * mean column variance).
  double gamma = 0.0;
  /// Stopping tolerance on the maximal KKT violation.
  double tolerance = 1e-3;
  /// Iteration cap; 0 selects max(10^7, 100 n).
  std::int64_t max_iterations = 0;
  /// Uniform row subsample drawn before training; 0 keeps every row.
  std::size_t max_train_rows = 0;
  std::uint64_t seed = 0;
  /// Kernel row cache budget.
  std::size_t cache_mb = 200;
};

struct SvrModel {
  Eigen::MatrixXd support_vectors;  // M x p
  Eigen::VectorXd dual_coef;        // alpha_i - alpha'_i, each in [-C, C]
  double bias = 0.0;
  double gamma = 1.0;
  bool converged = true;
  std::int64_t iterations = 0;
  /// Rows actually used for training (after subsampling).
  std::size_t train_rows = 0;

  std::size_t parameter_count() const {
    return static_cast<std::size_t>(support_vectors.rows() * (support_vectors.cols() + 1) + 1);
  }
};

/// Full dual solution for inspection and testing.
struct SvrDualSolution {
  Eigen::VectorXd alpha;        // multipliers of y - f <= eps + xi'
  Eigen::VectorXd alpha_star;   // multipliers of f - y <= eps + xi
  double bias = 0.0;
  double objective = 0.0;       // dual objective in minimization form
  bool converged = true;
  std::int64_t iterations = 0;
};

double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double gamma);

/// 1 / (p * mean column variance), or 1 / p for constant data.
double default_gamma(const Eigen::MatrixXd& X);

/// Solves the epsilon-SVR dual with two-variable (SMO) updates on maximal
/// violating pairs. Rows are used as given (no subsampling).
SvrDualSolution solve_svr_dual(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrParams& params,
                               double gamma);

/// Dual objective 0.5 (a-a*)^T K (a-a*) + eps sum(a+a*) - y^T (a-a*).
double svr_dual_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double epsilon,
                          const Eigen::VectorXd& alpha, const Eigen::VectorXd& alpha_star);

SvrModel fit_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrParams& params);

double predict_svr(const SvrModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd predict_svr(const SvrModel& model, const Eigen::MatrixXd& X, int jobs = 1);

}  // namespace pmtemp
