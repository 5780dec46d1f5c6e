#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace pmtemp {

/// Affine model y = b0 + x^T b. coefficients(0) is the intercept.
struct LinearModel {
  Eigen::VectorXd coefficients;
  /// Diagonal jitter (relative to the mean Gram diagonal) the solve needed; 0 if none.
  double jitter = 0.0;
  /// Set when the Cholesky route failed and a minimal-norm solve was used.
  bool min_norm_fallback = false;
  /// Reweighting passes taken by fit_wls_thermal.
  int irls_iterations = 0;

  Eigen::Index feature_count() const { return coefficients.size() - 1; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(coefficients.size()); }
};

struct ThermalWeightConfig {
  double w_min = 0.33;
  double w_max = 1.0;
  double under_estimate_factor = std::sqrt(10.0);
  int max_irls_iterations = 10;
};

LinearModel fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Minimizes sum_i w_i r_i^2. Weights must be nonnegative with at least one
/// positive entry.
LinearModel fit_wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w);

/// Linear map of targets onto [w_min, w_max] by closeness to min(y) / max(y).
Eigen::VectorXd thermal_weights(const Eigen::VectorXd& y, const ThermalWeightConfig& config);

/// Thermal-weight WLS with extra weight on under-estimated rows, refitted until
/// the set of under-estimated rows stops changing or the iteration cap hits.
LinearModel fit_wls_thermal(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const ThermalWeightConfig& config);

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& X);
double predict_row(const LinearModel& model, const Eigen::VectorXd& x);

}  // namespace pmtemp
