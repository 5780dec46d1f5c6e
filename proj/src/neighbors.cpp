#include "pmtemp/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>

#include "pmtemp/parallel.hpp"

namespace pmtemp {

std::string to_string(KnnWeighting w) { return w == KnnWeighting::uniform ? "uniform" : "distance"; }

KnnWeighting knn_weighting_from_string(const std::string& s) {
  if (s == "uniform") return KnnWeighting::uniform;
  if (s == "distance") return KnnWeighting::distance;
  throw std::invalid_argument("unknown k-NN weighting: " + s);
}

KdTree::KdTree(const RowMatrix& points, std::size_t leaf_size) {
  order_.resize(static_cast<std::size_t>(points.rows()));
  std::iota(order_.begin(), order_.end(), 0U);
  if (!order_.empty()) build(points, 0, static_cast<std::uint32_t>(order_.size()), std::max<std::size_t>(leaf_size, 1));
}

std::int32_t KdTree::build(const RowMatrix& points, std::uint32_t begin, std::uint32_t end, std::size_t leaf_size) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({});
  if (end - begin <= leaf_size) {
    nodes_[static_cast<std::size_t>(id)].begin = begin;
    nodes_[static_cast<std::size_t>(id)].end = end;
    return id;
  }
  // Split on the dimension of largest spread.
  int best_dim = -1;
  double best_spread = 0.0;
  for (Eigen::Index d = 0; d < points.cols(); ++d) {
    double lo = points(order_[begin], d), hi = lo;
    for (auto i = begin + 1; i < end; ++i) {
      const double v = points(order_[i], d);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = static_cast<int>(d);
    }
  }
  if (best_dim < 0) {  // all points identical
    nodes_[static_cast<std::size_t>(id)].begin = begin;
    nodes_[static_cast<std::size_t>(id)].end = end;
    return id;
  }
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points(a, best_dim) < points(b, best_dim); });
  const double split = points(order_[mid], best_dim);
  // Left rows have values <= split, right rows >= split.
  const auto left = build(points, begin, mid, leaf_size);
  const auto right = build(points, mid, end, leaf_size);
  auto& node = nodes_[static_cast<std::size_t>(id)];
  node.dim = best_dim;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

namespace {

struct Candidate {
  double dist2;
  std::size_t row;
};

// Strict weak order on (distance, feature-lexicographic row, label, row index).
struct CandidateLess {
  const KnnModel* model;
  bool operator()(const Candidate& a, const Candidate& b) const {
    if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
    const auto ra = model->X.row(static_cast<Eigen::Index>(a.row));
    const auto rb = model->X.row(static_cast<Eigen::Index>(b.row));
    for (Eigen::Index d = 0; d < ra.size(); ++d) {
      if (ra(d) != rb(d)) return ra(d) < rb(d);
    }
    const double ya = model->y(static_cast<Eigen::Index>(a.row));
    const double yb = model->y(static_cast<Eigen::Index>(b.row));
    if (ya != yb) return ya < yb;
    return a.row < b.row;
  }
};

double squared_distance(const KnnModel& model, std::size_t row, const Eigen::VectorXd& x) {
  const double* p = model.X.data() + row * static_cast<std::size_t>(model.X.cols());
  double s = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double diff = p[d] - x(d);
    s += diff * diff;
  }
  return s;
}

class Selector {
 public:
  Selector(const KnnModel& model, std::size_t k) : less_{&model}, k_(k), heap_(less_) {}

  void offer(const Candidate& c) {
    if (heap_.size() < k_) {
      heap_.push(c);
    } else if (less_(c, heap_.top())) {
      heap_.pop();
      heap_.push(c);
    }
  }
  bool full() const { return heap_.size() == k_; }
  double worst() const { return heap_.top().dist2; }

  std::vector<Candidate> sorted() {
    std::vector<Candidate> out;
    while (!heap_.empty()) {
      out.push_back(heap_.top());
      heap_.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

 private:
  CandidateLess less_;
  std::size_t k_;
  std::priority_queue<Candidate, std::vector<Candidate>, CandidateLess> heap_;
};

void search(const KnnModel& model, const Eigen::VectorXd& x, std::int32_t node_id, Selector& sel) {
  const auto& node = model.index.nodes()[static_cast<std::size_t>(node_id)];
  if (node.dim < 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      const std::size_t row = model.index.order()[i];
      sel.offer({squared_distance(model, row, x), row});
    }
    return;
  }
  const double diff = x(node.dim) - node.split;
  const auto near = diff <= 0.0 ? node.left : node.right;
  const auto far = diff <= 0.0 ? node.right : node.left;
  search(model, x, near, sel);
  // Ties at the worst distance must still be visited for deterministic ordering.
  if (!sel.full() || diff * diff <= sel.worst()) search(model, x, far, sel);
}

}  // namespace

KnnModel fit_knn(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k, KnnWeighting weighting,
                 bool build_index) {
  if (X.rows() != y.size()) throw std::invalid_argument("X and y row counts differ");
  if (k < 1 || k > X.rows()) throw std::invalid_argument("k must lie in [1, n]");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("non-finite training data");
  KnnModel model;
  model.X = X;
  model.y = y;
  model.k = k;
  model.weighting = weighting;
  if (build_index) model.index = KdTree(model.X);
  return model;
}

std::vector<Neighbor> nearest_neighbors(const KnnModel& model, const Eigen::VectorXd& x, bool use_index) {
  if (x.size() != model.X.cols()) throw std::invalid_argument("feature count mismatch");
  Selector sel(model, static_cast<std::size_t>(model.k));
  if (use_index && !model.index.empty()) {
    search(model, x, 0, sel);
  } else {
    for (std::size_t r = 0; r < static_cast<std::size_t>(model.X.rows()); ++r) {
      sel.offer({squared_distance(model, r, x), r});
    }
  }
  std::vector<Neighbor> out;
  for (const auto& c : sel.sorted()) out.push_back({c.row, std::sqrt(c.dist2)});
  return out;
}

double predict_knn(const KnnModel& model, const Eigen::VectorXd& x, bool use_index) {
  const auto neighbors = nearest_neighbors(model, x, use_index);
  if (model.weighting == KnnWeighting::uniform) {
    double sum = 0.0;
    for (const auto& n : neighbors) sum += model.y(static_cast<Eigen::Index>(n.row));
    return sum / static_cast<double>(neighbors.size());
  }
  double exact_sum = 0.0;
  std::size_t exact = 0;
  for (const auto& n : neighbors) {
    if (n.distance == 0.0) {
      exact_sum += model.y(static_cast<Eigen::Index>(n.row));
      ++exact;
    }
  }
  if (exact > 0) return exact_sum / static_cast<double>(exact);
  double num = 0.0, den = 0.0;
  for (const auto& n : neighbors) {
    const double w = 1.0 / n.distance;
    num += w * model.y(static_cast<Eigen::Index>(n.row));
    den += w;
  }
  return num / den;
}

Eigen::VectorXd predict_knn(const KnnModel& model, const Eigen::MatrixXd& X, int jobs) {
  if (X.cols() != model.X.cols()) throw std::invalid_argument("feature count mismatch");
  Eigen::VectorXd out(X.rows());
  parallel_for(static_cast<std::size_t>(X.rows()), jobs, [&](std::size_t i) {
    const Eigen::VectorXd q = X.row(static_cast<Eigen::Index>(i)).transpose();
    out(static_cast<Eigen::Index>(i)) = predict_knn(model, q, true);
  });
  return out;
}

}  // namespace pmtemp
