#include "pmtemp/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pmtemp/parallel.hpp"

namespace pmtemp {

double Tree::predict(const double* x) const {
  if (nodes_.empty()) throw std::logic_error("predict on an empty tree");
  std::size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto& n = nodes_[i];
    i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
  }
  return nodes_[i].value;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.feature < 0; }));
}

int Tree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<int> d(nodes_.size(), 0);
  int deepest = 0;
  // Children are always stored after their parent.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

namespace {

struct Split {
  double score = std::numeric_limits<double>::infinity();
  int feature = -1;
  double threshold = 0.0;
};

// Scores within rounding of each other count as ties.
bool clearly_lower(double a, double b) { return a < b - 1e-12 * std::max(1.0, std::abs(b)); }

bool better(const Split& a, const Split& b) {
  if (b.feature < 0) return true;
  if (clearly_lower(a.score, b.score)) return true;
  if (clearly_lower(b.score, a.score)) return false;
  if (a.feature != b.feature) return a.feature < b.feature;
  return a.threshold < b.threshold;
}

class Builder {
 public:
  Builder(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeParams& params, Rng& rng)
      : X_(X), y_(y), params_(params), rng_(rng) {
    const auto p = static_cast<int>(X.cols());
    mtry_ = params.max_features > 0 ? std::min(params.max_features, p) : std::max(1, (p + 2) / 3);
    features_.resize(static_cast<std::size_t>(p));
    std::iota(features_.begin(), features_.end(), 0);
  }

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    rows_ = std::move(rows);
    grow(0, rows_.size(), 0);
    return std::move(nodes_);
  }

 private:
  std::int32_t grow(std::size_t begin, std::size_t end, int depth) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({});
    const std::size_t n = end - begin;
    double mean = 0.0;
    for (std::size_t i = begin; i < end; ++i) mean += y_(static_cast<Eigen::Index>(rows_[i]));
    mean /= static_cast<double>(n);
    double sse = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = y_(static_cast<Eigen::Index>(rows_[i])) - mean;
      sse += d * d;
    }
    nodes_[static_cast<std::size_t>(id)].value = mean;
    nodes_[static_cast<std::size_t>(id)].samples = static_cast<std::uint32_t>(n);

    const auto min_leaf = static_cast<std::size_t>(std::max(1, params_.min_samples_leaf));
    if (depth >= params_.max_depth || n < static_cast<std::size_t>(std::max(2, params_.min_samples_split)) ||
        n < 2 * min_leaf || !(sse > 0.0)) {
      return id;
    }
    const Split split = find_split(begin, end, mean, min_leaf);
    if (split.feature < 0 || !(split.score < sse * (1.0 - 1e-12))) return id;

    const auto f = static_cast<Eigen::Index>(split.feature);
    const auto mid_it = std::stable_partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                              rows_.begin() + static_cast<std::ptrdiff_t>(end),
                                              [&](std::size_t r) { return X_(static_cast<Eigen::Index>(r), f) <= split.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - rows_.begin());
    const auto left = grow(begin, mid, depth + 1);
    const auto right = grow(mid, end, depth + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  Split find_split(std::size_t begin, std::size_t end, double mean, std::size_t min_leaf) {
    const std::size_t n = end - begin;
    rng_.shuffle(features_);
    Split best;
    int visited = 0;
    for (int f : features_) {
      if (visited >= mtry_) break;
      const auto fi = static_cast<Eigen::Index>(f);
      values_.clear();
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (std::size_t i = begin; i < end; ++i) {
        const auto r = static_cast<Eigen::Index>(rows_[i]);
        const double v = X_(r, fi);
        values_.push_back({v, y_(r) - mean});
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (!(hi > lo)) continue;  // constant features do not count towards mtry
      ++visited;
      Split candidate = params_.mode == SplitMode::best_split ? best_threshold(f, n, min_leaf)
                                                              : random_threshold(f, lo, hi, min_leaf);
      if (candidate.feature >= 0 && better(candidate, best)) best = candidate;
    }
    return best;
  }

  // Scores are children's summed squared deviations, from running sums of the
  // node-centered targets.
  static double children_sse(double sum_l, double sq_l, double n_l, double sum_r, double sq_r, double n_r) {
    return std::max(0.0, sq_l - sum_l * sum_l / n_l) + std::max(0.0, sq_r - sum_r * sum_r / n_r);
  }

  Split best_threshold(int feature, std::size_t n, std::size_t min_leaf) {
    std::sort(values_.begin(), values_.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double total = 0.0, total_sq = 0.0;
    for (const auto& [v, t] : values_) {
      total += t;
      total_sq += t * t;
    }
    Split best;
    double sum_l = 0.0, sq_l = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
      const double t = values_[i - 1].second;
      sum_l += t;
      sq_l += t * t;
      if (i < min_leaf || n - i < min_leaf) continue;
      const double a = values_[i - 1].first, b = values_[i].first;
      if (!(b > a)) continue;
      const double nl = static_cast<double>(i), nr = static_cast<double>(n - i);
      const double score = children_sse(sum_l, sq_l, nl, total - sum_l, total_sq - sq_l, nr);
      double threshold = a + (b - a) / 2.0;
      if (!(threshold < b)) threshold = a;
      if (best.feature < 0 || clearly_lower(score, best.score)) best = {score, feature, threshold};
    }
    return best;
  }

  Split random_threshold(int feature, double lo, double hi, std::size_t min_leaf) {
    double threshold = rng_.uniform(lo, hi);
    if (!(threshold < hi)) threshold = lo;
    double sum_l = 0.0, sq_l = 0.0, sum_r = 0.0, sq_r = 0.0;
    std::size_t n_l = 0, n_r = 0;
    for (const auto& [v, t] : values_) {
      if (v <= threshold) {
        sum_l += t;
        sq_l += t * t;
        ++n_l;
      } else {
        sum_r += t;
        sq_r += t * t;
        ++n_r;
      }
    }
    if (n_l < min_leaf || n_r < min_leaf) return {};
    return {children_sse(sum_l, sq_l, static_cast<double>(n_l), sum_r, sq_r, static_cast<double>(n_r)), feature,
            threshold};
  }

  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  TreeParams params_;
  Rng& rng_;
  int mtry_ = 1;
  std::vector<int> features_;
  std::vector<std::size_t> rows_;
  std::vector<std::pair<double, double>> values_;
  std::vector<TreeNode> nodes_;
};

void validate(const TreeParams& p) {
  if (p.max_depth < 0) throw std::invalid_argument("max_depth must be nonnegative");
  if (p.min_samples_split < 2) throw std::invalid_argument("min_samples_split must be >= 2");
  if (p.min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
  if (p.max_features < 0) throw std::invalid_argument("max_features must be nonnegative");
}

}  // namespace

Tree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeParams& params, Rng& rng,
              std::span<const std::size_t> rows) {
  validate(params);
  if (X.rows() != y.size()) throw std::invalid_argument("X and y row counts differ");
  if (X.rows() == 0 || X.cols() == 0) throw std::invalid_argument("empty training matrix");
  std::vector<std::size_t> idx;
  if (rows.empty()) {
    idx.resize(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), 0);
  } else {
    idx.assign(rows.begin(), rows.end());
    for (auto r : idx) {
      if (r >= static_cast<std::size_t>(X.rows())) throw std::invalid_argument("row index out of range");
    }
  }
  Builder builder(X, y, params, rng);
  return Tree(builder.build(std::move(idx)));
}

std::size_t Forest::node_count() const {
  std::size_t n = 0;
  for (const auto& t : trees) n += t.nodes().size();
  return n;
}

std::size_t Forest::parameter_count() const {
  std::size_t leaves = 0;
  for (const auto& t : trees) leaves += t.leaf_count();
  return node_count() * 4 + leaves;
}

Forest fit_ensemble(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestParams& params, int jobs) {
  if (params.n_estimators < 1) throw std::invalid_argument("n_estimators must be >= 1");
  validate(params.tree);
  Forest forest;
  forest.params = params;
  forest.features = X.cols();
  forest.trees.resize(static_cast<std::size_t>(params.n_estimators));
  const auto n = static_cast<std::size_t>(X.rows());
  parallel_for(forest.trees.size(), jobs, [&](std::size_t t) {
    Rng rng(params.seed, t);
    std::vector<std::size_t> rows;
    if (params.bootstrap) {
      rows.resize(n);
      for (auto& r : rows) r = rng.index(n);
    }
    forest.trees[t] = fit_tree(X, y, params.tree, rng, rows);
  });
  return forest;
}

double predict_forest(const Forest& forest, const Eigen::VectorXd& x) {
  if (x.size() != forest.features) throw std::invalid_argument("feature count mismatch");
  if (forest.trees.empty()) throw std::logic_error("forest has no trees");
  double sum = 0.0;
  for (const auto& t : forest.trees) sum += t.predict(x.data());
  return sum / static_cast<double>(forest.trees.size());
}

Eigen::VectorXd predict_forest(const Forest& forest, const Eigen::MatrixXd& X, int jobs) {
  if (X.cols() != forest.features) throw std::invalid_argument("feature count mismatch");
  Eigen::VectorXd out(X.rows());
  parallel_for(static_cast<std::size_t>(X.rows()), jobs, [&](std::size_t i) {
    const Eigen::VectorXd x = X.row(static_cast<Eigen::Index>(i)).transpose();
    out(static_cast<Eigen::Index>(i)) = predict_forest(forest, x);
  });
  return out;
}

std::string to_string(SplitMode mode) {
  return mode == SplitMode::best_split ? "best_split" : "random_threshold";
}

}  // namespace pmtemp
