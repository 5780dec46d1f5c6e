#include "pmtemp/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pmtemp/parallel.hpp"
#include "pmtemp/random.hpp"

namespace pmtemp {

namespace {

constexpr double kTau = 1e-12;

// LRU cache of RBF kernel rows.
class KernelCache {
 public:
  KernelCache(const Eigen::MatrixXd& X, double gamma, std::size_t budget_bytes)
      : X_(X), gamma_(gamma), norms_(X.rowwise().squaredNorm()) {
    const auto n = static_cast<std::size_t>(X.rows());
    rows_.resize(n);
    where_.resize(n, lru_.end());
    capacity_ = std::max<std::size_t>(2, budget_bytes / std::max<std::size_t>(1, n * sizeof(double)));
  }

  const std::vector<double>& row(std::size_t i) {
    if (where_[i] != lru_.end()) {
      lru_.splice(lru_.begin(), lru_, where_[i]);
      return rows_[i];
    }
    if (lru_.size() >= capacity_) {
      const std::size_t victim = lru_.back();
      lru_.pop_back();
      where_[victim] = lru_.end();
      std::vector<double>().swap(rows_[victim]);
    }
    const Eigen::VectorXd dots = X_ * X_.row(static_cast<Eigen::Index>(i)).transpose();
    auto& r = rows_[i];
    r.resize(static_cast<std::size_t>(X_.rows()));
    const double ni = norms_(static_cast<Eigen::Index>(i));
    for (Eigen::Index j = 0; j < X_.rows(); ++j) {
      const double d2 = std::max(0.0, ni + norms_(j) - 2.0 * dots(j));
      r[static_cast<std::size_t>(j)] = std::exp(-gamma_ * d2);
    }
    r[i] = 1.0;
    lru_.push_front(i);
    where_[i] = lru_.begin();
    return r;
  }

 private:
  const Eigen::MatrixXd& X_;
  double gamma_;
  Eigen::VectorXd norms_;
  std::vector<std::vector<double>> rows_;
  std::list<std::size_t> lru_;
  std::vector<std::list<std::size_t>::iterator> where_;
  std::size_t capacity_;
};

}  // namespace

double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double gamma) {
  if (a.size() != b.size()) throw std::invalid_argument("kernel arguments differ in dimension");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  return std::exp(-gamma * (a - b).squaredNorm());
}

double default_gamma(const Eigen::MatrixXd& X) {
  if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("empty matrix");
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const double var = (X.rowwise() - mean).array().square().sum() / static_cast<double>(X.rows() * X.cols());
  return var > 0.0 ? 1.0 / (static_cast<double>(X.cols()) * var) : 1.0 / static_cast<double>(X.cols());
}

double svr_dual_objective(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double epsilon,
                          const Eigen::VectorXd& alpha, const Eigen::VectorXd& alpha_star) {
  const Eigen::VectorXd beta = alpha - alpha_star;
  return 0.5 * beta.dot(K * beta) + epsilon * (alpha.sum() + alpha_star.sum()) - y.dot(beta);
}

SvrDualSolution solve_svr_dual(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrParams& params,
                               double gamma) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < 2) throw std::invalid_argument("SVR needs at least two rows");
  if (X.rows() != y.size()) throw std::invalid_argument("X and y row counts differ");
  if (!(params.C > 0.0)) throw std::invalid_argument("C must be positive");
  if (!(params.epsilon >= 0.0)) throw std::invalid_argument("epsilon must be nonnegative");
  if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
  if (!(params.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");

  const double C = params.C;
  const std::size_t l = 2 * n;
  auto sign = [n](std::size_t t) { return t < n ? 1.0 : -1.0; };
  auto base = [n](std::size_t t) { return t < n ? t : t - n; };

  std::vector<double> a(l, 0.0), G(l);
  for (std::size_t i = 0; i < n; ++i) {
    G[i] = params.epsilon - y(static_cast<Eigen::Index>(i));
    G[i + n] = params.epsilon + y(static_cast<Eigen::Index>(i));
  }
  const std::vector<double> p = G;
  KernelCache cache(X, gamma, params.cache_mb * 1024 * 1024);
  const std::int64_t max_iter =
      params.max_iterations > 0 ? params.max_iterations : std::max<std::int64_t>(10'000'000, 100 * static_cast<std::int64_t>(n));

  auto upper = [&](std::size_t t) { return a[t] >= C; };
  auto lower = [&](std::size_t t) { return a[t] <= 0.0; };

  SvrDualSolution sol;
  std::int64_t iter = 0;
  while (true) {
    // Maximal violating pair.
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t i = l, j = l;
    for (std::size_t t = 0; t < l; ++t) {
      if (sign(t) > 0) {
        if (!upper(t) && -G[t] >= gmax) { gmax = -G[t]; i = t; }
        if (!lower(t) && G[t] >= gmax2) { gmax2 = G[t]; j = t; }
      } else {
        if (!lower(t) && G[t] >= gmax) { gmax = G[t]; i = t; }
        if (!upper(t) && -G[t] >= gmax2) { gmax2 = -G[t]; j = t; }
      }
    }
    if (i == l || j == l || gmax + gmax2 < params.tolerance) break;
    if (iter >= max_iter) {
      sol.converged = false;
      break;
    }
    ++iter;

    // Copies: a second cache lookup may evict the first row.
    const std::vector<double> Ki = cache.row(base(i));
    const std::vector<double>& Kj = cache.row(base(j));
    const double yi = sign(i), yj = sign(j);
    const double Qij = yi * yj * Ki[base(j)];
    const double old_i = a[i], old_j = a[j];
    if (yi != yj) {
      double quad = 2.0 + 2.0 * Qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0.0) {
        if (a[j] < 0.0) { a[j] = 0.0; a[i] = diff; }
      } else {
        if (a[i] < 0.0) { a[i] = 0.0; a[j] = -diff; }
      }
      if (diff > 0.0) {
        if (a[i] > C) { a[i] = C; a[j] = C - diff; }
      } else {
        if (a[j] > C) { a[j] = C; a[i] = C + diff; }
      }
    } else {
      double quad = 2.0 - 2.0 * Qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > C) {
        if (a[i] > C) { a[i] = C; a[j] = sum - C; }
      } else {
        if (a[j] < 0.0) { a[j] = 0.0; a[i] = sum; }
      }
      if (sum > C) {
        if (a[j] > C) { a[j] = C; a[i] = sum - C; }
      } else {
        if (a[i] < 0.0) { a[i] = 0.0; a[j] = sum; }
      }
    }
    const double di = a[i] - old_i, dj = a[j] - old_j;
    for (std::size_t t = 0; t < l; ++t) {
      const double st = sign(t);
      const std::size_t bt = base(t);
      G[t] += st * (yi * Ki[bt] * di + yj * Kj[bt] * dj);
    }
  }
  sol.iterations = iter;

  // Bias from free variables, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum_free = 0.0;
  std::size_t free = 0;
  for (std::size_t t = 0; t < l; ++t) {
    const double yG = sign(t) * G[t];
    if (upper(t)) {
      if (sign(t) < 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
    } else if (lower(t)) {
      if (sign(t) > 0) ub = std::min(ub, yG); else lb = std::max(lb, yG);
    } else {
      ++free;
      sum_free += yG;
    }
  }
  const double rho = free > 0 ? sum_free / static_cast<double>(free) : (ub + lb) / 2.0;
  sol.bias = -rho;

  double obj = 0.0;
  for (std::size_t t = 0; t < l; ++t) obj += a[t] * (G[t] + p[t]);
  sol.objective = obj / 2.0;

  // Net coefficients; at most one of each pair stays nonzero.
  sol.alpha.resize(static_cast<Eigen::Index>(n));
  sol.alpha_star.resize(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const double coef = a[k] - a[k + n];
    sol.alpha(static_cast<Eigen::Index>(k)) = std::max(coef, 0.0);
    sol.alpha_star(static_cast<Eigen::Index>(k)) = std::max(-coef, 0.0);
  }
  return sol;
}

SvrModel fit_svr(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const SvrParams& params) {
  if (X.rows() != y.size()) throw std::invalid_argument("X and y row counts differ");
  const Eigen::MatrixXd* Xt = &X;
  const Eigen::VectorXd* yt = &y;
  Eigen::MatrixXd Xs;
  Eigen::VectorXd ys;
  if (params.max_train_rows > 0 && params.max_train_rows < static_cast<std::size_t>(X.rows())) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(params.seed);
    rng.shuffle(idx);
    idx.resize(params.max_train_rows);
    std::sort(idx.begin(), idx.end());
    Xs.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
    ys.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      Xs.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(idx[r]));
      ys(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(idx[r]));
    }
    Xt = &Xs;
    yt = &ys;
  }
  const double gamma = params.gamma > 0.0 ? params.gamma : default_gamma(*Xt);
  const auto sol = solve_svr_dual(*Xt, *yt, params, gamma);

  SvrModel model;
  model.gamma = gamma;
  model.bias = sol.bias;
  model.converged = sol.converged;
  model.iterations = sol.iterations;
  model.train_rows = static_cast<std::size_t>(Xt->rows());
  std::vector<Eigen::Index> sv;
  for (Eigen::Index k = 0; k < Xt->rows(); ++k) {
    if (sol.alpha(k) - sol.alpha_star(k) != 0.0) sv.push_back(k);
  }
  model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), Xt->cols());
  model.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t m = 0; m < sv.size(); ++m) {
    const auto mm = static_cast<Eigen::Index>(m);
    model.support_vectors.row(mm) = Xt->row(sv[m]);
    model.dual_coef(mm) = sol.alpha(sv[m]) - sol.alpha_star(sv[m]);
  }
  return model;
}

double predict_svr(const SvrModel& model, const Eigen::VectorXd& x) {
  if (model.support_vectors.rows() > 0 && x.size() != model.support_vectors.cols()) {
    throw std::invalid_argument("feature count mismatch");
  }
  double f = model.bias;
  for (Eigen::Index m = 0; m < model.support_vectors.rows(); ++m) {
    const double d2 = (model.support_vectors.row(m).transpose() - x).squaredNorm();
    f += model.dual_coef(m) * std::exp(-model.gamma * d2);
  }
  return f;
}

Eigen::VectorXd predict_svr(const SvrModel& model, const Eigen::MatrixXd& X, int jobs) {
  Eigen::VectorXd out(X.rows());
  parallel_for(static_cast<std::size_t>(X.rows()), jobs, [&](std::size_t i) {
    const Eigen::VectorXd x = X.row(static_cast<Eigen::Index>(i)).transpose();
    out(static_cast<Eigen::Index>(i)) = predict_svr(model, x);
  });
  return out;
}

}  // namespace pmtemp
