#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace pmtemp {

/// Matern 5/2 kernel with one length scale per input dimension.
struct GpHyperparameters {
  double signal_variance = 1.0;
  Eigen::VectorXd length_scales;
  double noise = 1e-6;  // variance, floored at kMinNoise
};

inline constexpr double kMinNoise = 1e-10;

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GpHyperparameters& hp);

struct GpFitOptions {
  int restarts = 5;
  int max_steps = 200;
  bool optimize = true;
  std::uint64_t seed = 0;
};

struct GpPosterior {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Exact GP regression on normalized targets.
class GaussianProcess {
 public:
  GaussianProcess() = default;

  /// Returns false (and leaves the model unusable) when the covariance stays
  /// singular after jitter escalation or fewer than 2 points are given.
  bool fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpFitOptions& options = {});
  /// Conditions on the data with fixed hyperparameters (no optimization).
  bool fit_fixed(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyperparameters& hp,
                 bool normalize = true);

  bool ok() const { return ok_; }
  GpPosterior predict(const Eigen::VectorXd& x) const;
  const GpHyperparameters& hyperparameters() const { return hp_; }
  double log_marginal_likelihood() const { return lml_; }
  /// Jitter added to the diagonal beyond the noise term.
  double jitter() const { return jitter_; }

 private:
  bool condition(const GpHyperparameters& hp);

  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;  // normalized
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  GpHyperparameters hp_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
  double jitter_ = 0.0;
  bool ok_ = false;
};

/// Log marginal likelihood of normalized targets and its gradient with
/// respect to (log signal variance, log length scales..., log noise).
/// Returns -inf when the covariance is not positive definite.
double gp_log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyperparameters& hp,
                                  Eigen::VectorXd* gradient = nullptr);

enum class AcquisitionKind { ei, pi, ucb };

const char* to_string(AcquisitionKind kind);

/// Scores for minimization; larger is better. UCB is the lower confidence
/// bound negated: kappa * sigma - mu.
double acquisition(double mu, double sigma, double best, AcquisitionKind kind, double xi = 0.0, double kappa = 1.96);

}  // namespace pmtemp
