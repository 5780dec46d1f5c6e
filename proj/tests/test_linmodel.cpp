#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pmtemp/linmodel.hpp"
#include "pmtemp/random.hpp"

using namespace pmtemp;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index n, Eigen::Index p, Rng& rng) {
  Eigen::MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  return X;
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

}  // namespace

TEST(Ols, MatchesPseudoInverse) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 20 + static_cast<Eigen::Index>(rng.index(200));
    const Eigen::Index p = 1 + static_cast<Eigen::Index>(rng.index(15));
    const Eigen::MatrixXd X = random_matrix(n, p, rng);
    Eigen::VectorXd y = random_matrix(n, 1, rng).col(0) * 3.0;
    y.array() += 10.0;
    const auto m = fit_ols(X, y);
    EXPECT_LE(rel_err(m.coefficients, oracle::pinv_ols(X, y)), 1e-8);
    EXPECT_EQ(m.parameter_count(), static_cast<std::size_t>(p + 1));
  }
}

TEST(Ols, RecoversExactAffineMap) {
  Rng rng(2);
  const Eigen::MatrixXd X = random_matrix(50, 3, rng);
  const Eigen::Vector3d b(1.5, -2.0, 0.25);
  const Eigen::VectorXd y = (X * b).array() + 7.0;
  const auto m = fit_ols(X, y);
  EXPECT_NEAR(m.coefficients(0), 7.0, 1e-10);
  EXPECT_LE((m.coefficients.tail(3) - b).norm(), 1e-10);
  EXPECT_LE((predict(m, X) - y).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(predict_row(m, X.row(4).transpose()), y(4), 1e-9);
}

TEST(Ols, RankDeficientFallsBackTowardsMinimalNorm) {
  Rng rng(3);
  Eigen::MatrixXd X = random_matrix(40, 3, rng);
  X.col(2) = X.col(0) * 2.0;  // collinear
  const Eigen::VectorXd y = random_matrix(40, 1, rng).col(0);
  const auto m = fit_ols(X, y);
  EXPECT_TRUE(m.jitter > 0.0 || m.min_norm_fallback);
  const Eigen::VectorXd want = oracle::pinv_ols(X, y);
  EXPECT_LE(rel_err(m.coefficients, want), 1e-4);
  const Eigen::VectorXd fitted = (X * want.tail(3)).array() + want(0);
  EXPECT_LE((predict(m, X) - fitted).norm(), 1e-6 * y.norm());
}

TEST(Ols, RejectsBadInput) {
  EXPECT_THROW(fit_ols(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)), std::invalid_argument);
  EXPECT_THROW(fit_ols(Eigen::MatrixXd::Ones(3, 2), Eigen::VectorXd::Ones(4)), std::invalid_argument);
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(3, 1);
  X(0, 0) = std::nan("");
  EXPECT_THROW(fit_ols(X, Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST(Wls, UnitWeightsEqualOls) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd X = random_matrix(60, 5, rng);
    const Eigen::VectorXd y = random_matrix(60, 1, rng).col(0);
    const auto a = fit_ols(X, y);
    const auto b = fit_wls(X, y, Eigen::VectorXd::Ones(60));
    EXPECT_LE(rel_err(b.coefficients, a.coefficients), 1e-10);
  }
}

TEST(Wls, IntegerWeightsEqualRowReplication) {
  Rng rng(5);
  const Eigen::MatrixXd X = random_matrix(30, 4, rng);
  const Eigen::VectorXd y = random_matrix(30, 1, rng).col(0);
  Eigen::VectorXd w(30);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < 30; ++i) {
    w(i) = static_cast<double>(1 + rng.index(4));
    for (int k = 0; k < static_cast<int>(w(i)); ++k) rows.push_back(i);
  }
  Eigen::MatrixXd Xr(static_cast<Eigen::Index>(rows.size()), 4);
  Eigen::VectorXd yr(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Xr.row(static_cast<Eigen::Index>(r)) = X.row(rows[r]);
    yr(static_cast<Eigen::Index>(r)) = y(rows[r]);
  }
  EXPECT_LE(rel_err(fit_wls(X, y, w).coefficients, fit_ols(Xr, yr).coefficients), 1e-9);
}

TEST(Wls, RejectsInvalidWeights) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 2);
  const Eigen::VectorXd y = Eigen::VectorXd::Random(5);
  EXPECT_THROW(fit_wls(X, y, -Eigen::VectorXd::Ones(5)), std::invalid_argument);
  EXPECT_THROW(fit_wls(X, y, Eigen::VectorXd::Zero(5)), std::invalid_argument);
  EXPECT_THROW(fit_wls(X, y, Eigen::VectorXd::Ones(4)), std::invalid_argument);
}

TEST(ThermalWeights, MapTargetRangeLinearly) {
  Eigen::VectorXd y(3);
  y << 20.0, 60.0, 100.0;
  const auto w = thermal_weights(y, {});
  EXPECT_DOUBLE_EQ(w(0), 0.33);
  EXPECT_DOUBLE_EQ(w(2), 1.0);
  EXPECT_NEAR(w(1), 0.665, 1e-12);
  EXPECT_THROW(thermal_weights(Eigen::VectorXd::Constant(4, 3.0), {}), std::invalid_argument);
}

TEST(ThermalWls, ReducesUnderEstimationOfHotSamples) {
  Rng rng(6);
  const Eigen::Index n = 400;
  Eigen::MatrixXd X(n, 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform(0.0, 1.0);
    y(i) = 30.0 + 60.0 * X(i, 0) * X(i, 0) + rng.normal();  // curved: a line must miss somewhere
  }
  const auto ols = fit_ols(X, y);
  const auto wls = fit_wls_thermal(X, y, {});
  EXPECT_GE(wls.irls_iterations, 1);
  EXPECT_LE(wls.irls_iterations, ThermalWeightConfig{}.max_irls_iterations);
  double ols_under = 0.0, wls_under = 0.0;
  const Eigen::VectorXd r_ols = y - predict(ols, X);
  const Eigen::VectorXd r_wls = y - predict(wls, X);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) > 70.0) {
      ols_under += std::max(r_ols(i), 0.0);
      wls_under += std::max(r_wls(i), 0.0);
    }
  }
  EXPECT_LT(wls_under, ols_under);
}

TEST(ThermalWls, ExactFitNeedsNoReweighting) {
  Rng rng(7);
  const Eigen::MatrixXd X = random_matrix(30, 2, rng);
  const Eigen::VectorXd y = (X * Eigen::Vector2d(2.0, -1.0)).array() + 50.0;
  const auto m = fit_wls_thermal(X, y, {});
  EXPECT_EQ(m.irls_iterations, 1);
  EXPECT_LE((predict(m, X) - y).cwiseAbs().maxCoeff(), 1e-8);
}
