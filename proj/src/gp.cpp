#include "pmtemp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "pmtemp/random.hpp"

namespace pmtemp {

namespace {

constexpr double kSqrt5 = 2.23606797749978969641;

// Box for the log-space optimization of normalized-target hyperparameters.
constexpr double kLogVarLo = -4.0, kLogVarHi = 4.0;
constexpr double kLogLenLo = -5.0, kLogLenHi = 3.5;
constexpr double kLogNoiseHi = 0.0;
const double kLogNoiseLo = std::log(kMinNoise);

Eigen::VectorXd pack(const GpHyperparameters& hp) {
  const Eigen::Index d = hp.length_scales.size();
  Eigen::VectorXd theta(d + 2);
  theta(0) = std::log(hp.signal_variance);
  theta.segment(1, d) = hp.length_scales.array().log().matrix();
  theta(d + 1) = std::log(std::max(hp.noise, kMinNoise));
  return theta;
}

GpHyperparameters unpack(const Eigen::VectorXd& theta) {
  const Eigen::Index d = theta.size() - 2;
  GpHyperparameters hp;
  hp.signal_variance = std::exp(theta(0));
  hp.length_scales = theta.segment(1, d).array().exp().matrix();
  hp.noise = std::max(std::exp(theta(d + 1)), kMinNoise);
  return hp;
}

void clip(Eigen::VectorXd& theta) {
  const Eigen::Index d = theta.size() - 2;
  theta(0) = std::clamp(theta(0), kLogVarLo, kLogVarHi);
  for (Eigen::Index i = 1; i <= d; ++i) theta(i) = std::clamp(theta(i), kLogLenLo, kLogLenHi);
  theta(d + 1) = std::clamp(theta(d + 1), kLogNoiseLo, kLogNoiseHi);
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

double matern52(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GpHyperparameters& hp) {
  const double r = ((a - b).array() / hp.length_scales.array()).matrix().norm();
  return hp.signal_variance * (1.0 + kSqrt5 * r + 5.0 / 3.0 * r * r) * std::exp(-kSqrt5 * r);
}

double gp_log_marginal_likelihood(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyperparameters& hp,
                                  Eigen::VectorXd* gradient) {
  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = hp.signal_variance;
    for (Eigen::Index j = 0; j < i; ++j) K(i, j) = K(j, i) = matern52(X.row(i), X.row(j), hp);
  }
  Eigen::MatrixXd Ky = K;
  Ky.diagonal().array() += hp.noise;
  Eigen::LLT<Eigen::MatrixXd> llt(Ky);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Eigen::VectorXd alpha = llt.solve(y);
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double lml = -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!std::isfinite(lml)) return -std::numeric_limits<double>::infinity();
  if (gradient) {
    const Eigen::MatrixXd W = alpha * alpha.transpose() - llt.solve(Eigen::MatrixXd::Identity(n, n));
    gradient->setZero(d + 2);
    (*gradient)(0) = 0.5 * (W.array() * K.array()).sum();
    (*gradient)(d + 1) = 0.5 * hp.noise * W.trace();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        const Eigen::ArrayXd delta = (X.row(i) - X.row(j)).transpose().array() / hp.length_scales.array();
        const double r = std::sqrt(delta.square().sum());
        const double common = hp.signal_variance * 5.0 / 3.0 * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
        // W is symmetric: the (i, j) and (j, i) terms are equal.
        gradient->segment(1, d).array() += W(i, j) * common * delta.square();
      }
    }
  }
  return lml;
}

bool GaussianProcess::condition(const GpHyperparameters& hp) {
  const Eigen::Index n = X_.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    K(i, i) = hp.signal_variance + hp.noise;
    for (Eigen::Index j = 0; j < i; ++j) K(i, j) = K(j, i) = matern52(X_.row(i), X_.row(j), hp);
  }
  for (double jitter : {0.0, 1e-10, 1e-8, 1e-6, 1e-4}) {
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += jitter * hp.signal_variance;
    llt_.compute(Kj);
    if (llt_.info() != Eigen::Success) continue;
    alpha_ = llt_.solve(y_);
    if (!alpha_.allFinite()) continue;
    jitter_ = jitter * hp.signal_variance;
    hp_ = hp;
    const double log_det = 2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
    lml_ = -0.5 * y_.dot(alpha_) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    ok_ = true;
    return true;
  }
  ok_ = false;
  return false;
}

bool GaussianProcess::fit_fixed(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpHyperparameters& hp,
                                bool normalize) {
  ok_ = false;
  if (X.rows() < 2 || X.rows() != y.size() || !y.allFinite()) return false;
  X_ = X;
  y_mean_ = 0.0;
  y_scale_ = 1.0;
  if (normalize) {
    y_mean_ = y.mean();
    const double sd = std::sqrt((y.array() - y_mean_).square().mean());
    y_scale_ = sd > 0.0 ? sd : 1.0;
  }
  y_ = (y.array() - y_mean_) / y_scale_;
  GpHyperparameters h = hp;
  h.noise = std::max(h.noise, kMinNoise);
  return condition(h);
}

bool GaussianProcess::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GpFitOptions& options) {
  GpHyperparameters start;
  start.length_scales = Eigen::VectorXd::Constant(X.cols(), 0.3);
  start.noise = 1e-4;
  if (!fit_fixed(X, y, start)) return false;
  if (!options.optimize) return true;

  Rng rng(options.seed, 0x6770);
  Eigen::VectorXd best_theta = pack(start);
  double best = gp_log_marginal_likelihood(X_, y_, start);
  for (int restart = 0; restart < std::max(options.restarts, 1); ++restart) {
    Eigen::VectorXd theta = pack(start);
    if (restart > 0) {
      theta(0) = rng.uniform(-1.0, 1.0);
      for (Eigen::Index i = 1; i < theta.size() - 1; ++i) theta(i) = rng.uniform(std::log(0.05), std::log(2.0));
      theta(theta.size() - 1) = rng.uniform(std::log(1e-8), std::log(1e-2));
    }
    Eigen::VectorXd grad;
    double value = gp_log_marginal_likelihood(X_, y_, unpack(theta), &grad);
    if (!std::isfinite(value)) continue;
    double step = 0.5;
    for (int it = 0; it < options.max_steps && step > 1e-8; ++it) {
      const double gnorm = grad.norm();
      if (!(gnorm > 1e-10)) break;
      Eigen::VectorXd trial = theta + step * grad / std::max(gnorm, 1.0);
      clip(trial);
      Eigen::VectorXd trial_grad;
      const double v = gp_log_marginal_likelihood(X_, y_, unpack(trial), &trial_grad);
      if (std::isfinite(v) && v > value) {
        const double gain = v - value;
        theta = trial;
        value = v;
        grad = trial_grad;
        step = std::min(step * 1.5, 2.0);
        if (gain < 1e-9) break;
      } else {
        step *= 0.5;
      }
    }
    if (value > best) {
      best = value;
      best_theta = theta;
    }
  }
  if (!condition(unpack(best_theta))) return condition(start);
  return true;
}

GpPosterior GaussianProcess::predict(const Eigen::VectorXd& x) const {
  GpPosterior out;
  if (!ok_) return out;
  const Eigen::Index n = X_.rows();
  Eigen::VectorXd k(n);
  for (Eigen::Index i = 0; i < n; ++i) k(i) = matern52(X_.row(i), x, hp_);
  const Eigen::VectorXd v = llt_.matrixL().solve(k);
  const double var = std::max(hp_.signal_variance - v.squaredNorm(), 0.0);
  out.mean = y_mean_ + y_scale_ * k.dot(alpha_);
  out.stddev = y_scale_ * std::sqrt(var);
  return out;
}

const char* to_string(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::ei: return "ei";
    case AcquisitionKind::pi: return "pi";
    case AcquisitionKind::ucb: return "ucb";
  }
  return "?";
}

double acquisition(double mu, double sigma, double best, AcquisitionKind kind, double xi, double kappa) {
  const double gain = best - mu - xi;
  switch (kind) {
    case AcquisitionKind::ei:
      if (sigma <= 0.0) return std::max(gain, 0.0);
      return gain * normal_cdf(gain / sigma) + sigma * normal_pdf(gain / sigma);
    case AcquisitionKind::pi:
      if (sigma <= 0.0) return gain > 0.0 ? 1.0 : 0.0;
      return normal_cdf(gain / sigma);
    case AcquisitionKind::ucb:
      return kappa * std::max(sigma, 0.0) - mu;
  }
  return 0.0;
}

}  // namespace pmtemp
