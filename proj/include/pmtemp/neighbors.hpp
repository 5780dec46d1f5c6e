#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace pmtemp {

enum class KnnWeighting { uniform, distance };

std::string to_string(KnnWeighting w);
KnnWeighting knn_weighting_from_string(const std::string& s);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Exact k-d tree over the rows of a matrix (indices into it).
class KdTree {
 public:
  struct Node {
    int dim = -1;  // -1 for leaves
    double split = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;  // leaf row range in order()
    std::uint32_t end = 0;
  };

  KdTree() = default;
  KdTree(const RowMatrix& points, std::size_t leaf_size = 16);

  bool empty() const { return nodes_.empty(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::uint32_t>& order() const { return order_; }

 private:
  std::int32_t build(const RowMatrix& points, std::uint32_t begin, std::uint32_t end, std::size_t leaf_size);

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> order_;
};

struct KnnModel {
  RowMatrix X;
  Eigen::VectorXd y;
  int k = 1;
  KnnWeighting weighting = KnnWeighting::uniform;
  KdTree index;

  Eigen::Index feature_count() const { return X.cols(); }
  /// Stored values: every training row plus its label.
  std::size_t parameter_count() const { return static_cast<std::size_t>(X.rows() * (X.cols() + 1)); }
};

struct Neighbor {
  std::size_t row = 0;
  double distance = 0.0;  // euclidean
};

/// Stores the training data. Throws std::invalid_argument unless 1 <= k <= n.
KnnModel fit_knn(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int k, KnnWeighting weighting,
                 bool build_index = true);

/// The k nearest rows ordered by (distance, feature-lexicographic row, label).
std::vector<Neighbor> nearest_neighbors(const KnnModel& model, const Eigen::VectorXd& x, bool use_index = true);

double predict_knn(const KnnModel& model, const Eigen::VectorXd& x, bool use_index = true);
Eigen::VectorXd predict_knn(const KnnModel& model, const Eigen::MatrixXd& X, int jobs = 1);

}  // namespace pmtemp
