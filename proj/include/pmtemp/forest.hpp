#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmtemp/random.hpp"

namespace pmtemp {

enum class SplitMode { best_split, random_threshold };

struct TreeParams {
  int max_depth = 60;
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  /// Features examined per split; 0 selects ceil(p / 3).
  int max_features = 0;
  SplitMode mode = SplitMode::best_split;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;  // mean target of the node's training rows
  std::uint32_t samples = 0;
  bool operator==(const TreeNode&) const = default;
};

/// Regression tree; rows with x[feature] <= threshold go left.
class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(const double* x) const;
  double predict(const Eigen::VectorXd& x) const { return predict(x.data()); }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t leaf_count() const;
  int depth() const;
  bool operator==(const Tree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

/// Greedy variance-reduction tree on the given rows (duplicates allowed; they
/// act as bootstrap multiplicities). An empty `rows` means all rows.
Tree fit_tree(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const TreeParams& params, Rng& rng,
              std::span<const std::size_t> rows = {});

struct ForestParams {
  TreeParams tree;
  int n_estimators = 100;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

/// Tree i is grown with Rng(seed, i), so results do not depend on the number
/// of worker threads.
struct Forest {
  std::vector<Tree> trees;
  ForestParams params;
  Eigen::Index features = 0;

  std::size_t node_count() const;
  /// 4 values per node plus one per leaf.
  std::size_t parameter_count() const;
};

Forest fit_ensemble(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ForestParams& params, int jobs = 1);

double predict_forest(const Forest& forest, const Eigen::VectorXd& x);
Eigen::VectorXd predict_forest(const Forest& forest, const Eigen::MatrixXd& X, int jobs = 1);

std::string to_string(SplitMode mode);

}  // namespace pmtemp
