#include "pmtemp/linmodel.hpp"

#include <stdexcept>
#include <vector>

namespace pmtemp {

namespace {

void check_shapes(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() == 0) throw std::invalid_argument("least squares needs at least one row");
  if (X.rows() != y.size()) throw std::invalid_argument("X and y row counts differ");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("non-finite regression input");
}

// Solves the weighted normal equations for [1 X] with sqrt-weights s.
LinearModel solve_normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& sqrt_w) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  Eigen::MatrixXd A(n, p + 1);
  A.col(0) = sqrt_w;
  A.rightCols(p) = sqrt_w.asDiagonal() * X;
  const Eigen::VectorXd b = sqrt_w.cwiseProduct(y);

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p + 1, p + 1);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(A.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd rhs = A.transpose() * b;
  const double scale = std::max(gram.diagonal().mean(), 1e-300);

  LinearModel model;
  for (double jitter : {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6}) {
    Eigen::MatrixXd g = gram;
    g.diagonal().array() += jitter * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13)) continue;
    model.coefficients = llt.solve(rhs);
    if (!model.coefficients.allFinite()) continue;
    model.jitter = jitter;
    return model;
  }
  // Minimal-norm least squares on the weighted design.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  model.coefficients = cod.solve(b);
  model.min_norm_fallback = true;
  return model;
}

}  // namespace

LinearModel fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  check_shapes(X, y);
  return solve_normal_equations(X, y, Eigen::VectorXd::Ones(X.rows()));
}

LinearModel fit_wls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  check_shapes(X, y);
  if (w.size() != X.rows()) throw std::invalid_argument("weight count differs from row count");
  if (!w.allFinite() || (w.array() < 0.0).any()) throw std::invalid_argument("weights must be finite and nonnegative");
  if (!(w.array() > 0.0).any()) throw std::invalid_argument("all weights are zero");
  return solve_normal_equations(X, y, w.cwiseSqrt());
}

Eigen::VectorXd thermal_weights(const Eigen::VectorXd& y, const ThermalWeightConfig& config) {
  if (!(config.w_min > 0.0) || config.w_max < config.w_min) {
    throw std::invalid_argument("thermal weights need 0 < w_min <= w_max");
  }
  if (y.size() == 0) throw std::invalid_argument("empty target vector");
  const double lo = y.minCoeff();
  const double hi = y.maxCoeff();
  if (!(hi > lo)) throw std::invalid_argument("thermal weights need a non-constant target");
  return (config.w_min + (config.w_max - config.w_min) * (y.array() - lo) / (hi - lo)).matrix();
}

LinearModel fit_wls_thermal(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const ThermalWeightConfig& config) {
  if (config.under_estimate_factor < 1.0) throw std::invalid_argument("under-estimate factor must be >= 1");
  if (config.max_irls_iterations < 0) throw std::invalid_argument("negative IRLS iteration cap");
  const Eigen::VectorXd base = thermal_weights(y, config);
  LinearModel model = fit_wls(X, y, base);
  const double tol = 1e-10 * std::max(1.0, y.cwiseAbs().maxCoeff());

  auto under_set = [&](const LinearModel& m) {
    const Eigen::VectorXd residual = y - predict(m, X);
    std::vector<bool> under(static_cast<std::size_t>(y.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i) under[static_cast<std::size_t>(i)] = residual(i) > tol;
    return under;
  };

  auto under = under_set(model);
  for (int it = 1; it <= config.max_irls_iterations; ++it) {
    Eigen::VectorXd w = base;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      if (under[static_cast<std::size_t>(i)]) w(i) *= config.under_estimate_factor;
    }
    model = fit_wls(X, y, w);
    model.irls_iterations = it;
    auto next = under_set(model);
    if (next == under) break;
    under = std::move(next);
  }
  return model;
}

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.feature_count()) throw std::invalid_argument("feature count mismatch");
  Eigen::VectorXd out = X * model.coefficients.tail(model.feature_count());
  out.array() += model.coefficients(0);
  return out;
}

double predict_row(const LinearModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.feature_count()) throw std::invalid_argument("feature count mismatch");
  return model.coefficients(0) + x.dot(model.coefficients.tail(model.feature_count()));
}

}  // namespace pmtemp
