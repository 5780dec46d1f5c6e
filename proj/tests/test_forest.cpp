#include <gtest/gtest.h>

#include <limits>
#include <numeric>

#include "oracles.hpp"
#include "pmtemp/forest.hpp"
#include "pmtemp/random.hpp"

using namespace pmtemp;

namespace {

struct Data {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

Data make_data(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  Rng rng(seed);
  Data d{Eigen::MatrixXd(n, p), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < p; ++c) d.X(i, c) = rng.uniform(-1.0, 1.0);
    d.y(i) = std::sin(3.0 * d.X(i, 0)) + (p > 1 ? d.X(i, 1) * d.X(i, 1) : 0.0) + 0.1 * rng.normal();
  }
  return d;
}

}  // namespace

TEST(Tree, MatchesExhaustiveCartOracle) {
  const Data d = make_data(120, 3, 1);
  for (int depth : {1, 3, 60}) {
    for (int leaf : {1, 4}) {
      TreeParams tp;
      tp.max_depth = depth;
      tp.min_samples_leaf = leaf;
      tp.max_features = 3;
      Rng rng(0);
      const Tree tree = fit_tree(d.X, d.y, tp, rng);
      const oracle::CartTree cart{d.X, d.y, depth, static_cast<std::size_t>(leaf)};
      std::vector<std::size_t> all(120);
      std::iota(all.begin(), all.end(), 0);
      Rng q(5);
      for (int t = 0; t < 40; ++t) {
        Eigen::VectorXd x(3);
        for (int c = 0; c < 3; ++c) x(c) = q.uniform(-1.0, 1.0);
        EXPECT_NEAR(tree.predict(x), cart.predict(all, x), 1e-12) << "depth " << depth << " leaf " << leaf;
      }
      EXPECT_LE(tree.depth(), depth);
    }
  }
}

TEST(Tree, FullyGrownTreeInterpolatesDistinctRows) {
  const Data d = make_data(200, 2, 2);
  TreeParams tp;
  tp.max_features = 2;
  Rng rng(0);
  const Tree tree = fit_tree(d.X, d.y, tp, rng);
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) EXPECT_DOUBLE_EQ(tree.predict(d.X.row(i).transpose().eval()), d.y(i));
  EXPECT_EQ(tree.leaf_count(), 200u);
}

TEST(Tree, MinSamplesLeafIsRespected) {
  const Data d = make_data(300, 2, 3);
  TreeParams tp;
  tp.min_samples_leaf = 7;
  tp.min_samples_split = 15;
  Rng rng(0);
  const Tree tree = fit_tree(d.X, d.y, tp, rng);
  for (const auto& n : tree.nodes()) {
    if (n.feature < 0) EXPECT_GE(n.samples, 7u);
    else EXPECT_GE(n.samples, 15u);
  }
}

TEST(Tree, ConstantTargetGivesSingleLeaf) {
  const Data d = make_data(50, 2, 4);
  Rng rng(0);
  const Tree tree = fit_tree(d.X, Eigen::VectorXd::Constant(50, 3.0), {}, rng);
  EXPECT_EQ(tree.nodes().size(), 1u);
  EXPECT_DOUBLE_EQ(tree.predict(d.X.row(0).transpose().eval()), 3.0);
}

TEST(Tree, RandomThresholdsLieInsideNodeRange) {
  const Data d = make_data(200, 3, 5);
  TreeParams tp;
  tp.mode = SplitMode::random_threshold;
  Rng rng(9);
  const Tree tree = fit_tree(d.X, d.y, tp, rng);
  for (const auto& n : tree.nodes()) {
    if (n.feature < 0) continue;
    EXPECT_GE(n.threshold, d.X.col(n.feature).minCoeff());
    EXPECT_LT(n.threshold, d.X.col(n.feature).maxCoeff());
  }
}

TEST(Tree, RejectsBadParameters) {
  const Data d = make_data(10, 2, 6);
  Rng rng(0);
  TreeParams tp;
  tp.min_samples_split = 1;
  EXPECT_THROW(fit_tree(d.X, d.y, tp, rng), std::invalid_argument);
  tp = {};
  tp.min_samples_leaf = 0;
  EXPECT_THROW(fit_tree(d.X, d.y, tp, rng), std::invalid_argument);
}

TEST(Forest, PredictionIsMeanOfTrees) {
  const Data d = make_data(150, 4, 7);
  ForestParams fp;
  fp.n_estimators = 12;
  fp.seed = 3;
  const Forest f = fit_ensemble(d.X, d.y, fp, 2);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = d.X.row(i).transpose();
    double s = 0.0;
    for (const auto& t : f.trees) s += t.predict(x);
    EXPECT_NEAR(predict_forest(f, x), s / 12.0, 1e-12);
  }
  const Eigen::VectorXd batch = predict_forest(f, d.X, 3);
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) EXPECT_NEAR(batch(i), predict_forest(f, d.X.row(i).transpose().eval()), 1e-12);
}

TEST(Forest, TreesMatchIndividuallySeededFits) {
  const Data d = make_data(100, 3, 8);
  ForestParams fp;
  fp.n_estimators = 5;
  fp.seed = 11;
  fp.tree.mode = SplitMode::random_threshold;
  const Forest f = fit_ensemble(d.X, d.y, fp, 1);
  for (std::size_t t = 0; t < f.trees.size(); ++t) {
    Rng rng(11, t);
    std::vector<std::size_t> rows(100);
    for (auto& r : rows) r = rng.index(100);
    EXPECT_EQ(fit_tree(d.X, d.y, fp.tree, rng, rows), f.trees[t]);
  }
}

TEST(Forest, DeterministicAcrossThreadCounts) {
  const Data d = make_data(200, 5, 9);
  ForestParams fp;
  fp.n_estimators = 8;
  fp.seed = 4;
  const Forest a = fit_ensemble(d.X, d.y, fp, 1);
  const Forest b = fit_ensemble(d.X, d.y, fp, 4);
  ASSERT_EQ(a.trees.size(), b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) EXPECT_EQ(a.trees[t], b.trees[t]);
  fp.seed = 5;
  const Forest c = fit_ensemble(d.X, d.y, fp, 1);
  EXPECT_FALSE(a.trees[0] == c.trees[0]);
}

TEST(Forest, ParameterCountCountsNodesAndLeaves) {
  const Data d = make_data(60, 2, 10);
  ForestParams fp;
  fp.n_estimators = 3;
  const Forest f = fit_ensemble(d.X, d.y, fp);
  std::size_t nodes = 0, leaves = 0;
  for (const auto& t : f.trees) {
    nodes += t.nodes().size();
    leaves += t.leaf_count();
  }
  EXPECT_EQ(f.parameter_count(), 4 * nodes + leaves);
}

TEST(Forest, ExtraTreesAndRandomForestBeatTheMean) {
  const Data train = make_data(400, 3, 12);
  const Data test = make_data(200, 3, 13);
  const double base = (test.y.array() - train.y.mean()).square().mean();
  for (auto mode : {SplitMode::best_split, SplitMode::random_threshold}) {
    ForestParams fp;
    fp.n_estimators = 30;
    fp.tree.mode = mode;
    const Forest f = fit_ensemble(train.X, train.y, fp);
    const double mse = (predict_forest(f, test.X) - test.y).array().square().mean();
    EXPECT_LT(mse, 0.3 * base) << to_string(mode);
  }
}
