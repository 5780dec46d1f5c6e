#include <gtest/gtest.h>

#include <filesystem>

#include "pmtemp/model.hpp"
#include "pmtemp/thermal_network.hpp"

using namespace pmtemp;
using nlohmann::json;

namespace {

Dataset small_synthetic(std::size_t profiles, std::uint64_t seed) {
  SyntheticConfig c;
  c.profiles = profiles;
  c.duration_s = 300.0;
  return generate_synthetic(c, seed);
}

json small_hyperparameters(ModelKind kind) {
  switch (kind) {
    case ModelKind::knn: return {{"neighbors", 5}, {"weighting", "distance"}};
    case ModelKind::rf:
    case ModelKind::et: return {{"estimators", 4}, {"max_depth", 6}, {"seed", 3}};
    case ModelKind::svr: return {{"C", 1.0}, {"epsilon", 0.1}, {"max_train_rows", 200}, {"seed", 1}};
    case ModelKind::mlp: return {{"units", 8}, {"max_epochs", 3}, {"seed", 2}};
    default: return json::object();
  }
}

const std::vector<ModelKind> kKinds = {ModelKind::ols, ModelKind::wls, ModelKind::knn, ModelKind::rf,
                                       ModelKind::et,  ModelKind::svr, ModelKind::mlp};

}  // namespace

TEST(Spec, NamesRoundTrip) {
  for (auto k : kKinds) EXPECT_EQ(model_kind_from_string(to_string(k)), k);
  EXPECT_EQ(display_name(ModelKind::knn), "k-NN");
  EXPECT_TRUE(is_stochastic(ModelKind::mlp));
  EXPECT_FALSE(is_stochastic(ModelKind::ols));
  EXPECT_THROW(model_kind_from_string("gbm"), std::invalid_argument);
}

TEST(Spec, JsonRoundTripAndUnknownKeys) {
  for (auto k : kKinds) {
    const ModelSpec spec = spec_from_json(k, small_hyperparameters(k));
    const json doc = spec_to_json(spec);
    EXPECT_EQ(spec_to_json(spec_from_json(k, doc)), doc) << to_string(k);
    json bad = small_hyperparameters(k);
    bad["bogus"] = 1;
    EXPECT_THROW(spec_from_json(k, bad), std::invalid_argument) << to_string(k);
  }
  EXPECT_THROW(spec_from_json(ModelKind::mlp, {{"layers", 7}}), std::invalid_argument);
  EXPECT_THROW(spec_from_json(ModelKind::knn, {{"weighting", "gaussian"}}), std::invalid_argument);
}

TEST(Artifact, RoundTripPreservesPredictions) {
  const Dataset train = small_synthetic(3, 1);
  SyntheticConfig tc;
  tc.duration_s = 200.0;
  tc.profile_prefix = "test";
  const Dataset test = generate_synthetic(tc, 2);
  const SpanSet spans({10, 40});
  const FeatureMatrix ftrain = build_features(train, spans);
  const FeatureMatrix ftest = build_features(test, spans);
  const auto dir = std::filesystem::temp_directory_path() / "pmtemp_test_model";
  std::filesystem::create_directories(dir);
  for (auto k : kKinds) {
    const Pipeline p = fit_pipeline(spec_from_json(k, small_hyperparameters(k)), ftrain);
    const Eigen::VectorXd before = predict_pipeline(p, ftest);
    const auto path = dir / (to_string(k) + ".json");
    save_artifact(p, path);
    const Pipeline q = load_artifact(path);
    EXPECT_EQ(q.model.kind, k);
    EXPECT_EQ(q.spans, spans);
    EXPECT_EQ(q.model.parameter_count(), p.model.parameter_count());
    const Eigen::VectorXd after = predict_pipeline(q, ftest);
    EXPECT_LE((before - after).cwiseAbs().maxCoeff(), 1e-9) << to_string(k);
    EXPECT_EQ(spec_to_json(q.spec), spec_to_json(p.spec));
    std::filesystem::remove(path);
  }
  std::filesystem::remove(dir);
}

TEST(Artifact, RejectsForeignDocuments) {
  EXPECT_THROW(pipeline_from_json({{"format", "other"}}), std::exception);
  EXPECT_THROW(load_artifact("/nonexistent/model.json"), std::exception);
}

TEST(Pipeline, SpanMismatchIsRejected) {
  const Dataset train = small_synthetic(2, 3);
  const Pipeline p = fit_pipeline({}, build_features(train, SpanSet({10, 40})));
  EXPECT_THROW(predict_pipeline(p, build_features(train, SpanSet({10, 50}))), std::invalid_argument);
}

TEST(Pipeline, ScalerHookSeesTrainingRowsOnly) {
  const Dataset train = small_synthetic(2, 4);
  const FeatureMatrix f = build_features(train, SpanSet({10}));
  Eigen::Index rows = -1;
  fit_pipeline({}, f, 1, [&](const FeatureMatrix& used) { rows = used.rows(); });
  EXPECT_EQ(rows, f.rows());
}

TEST(Stream, MatchesBatchAndResetsOnProfileChange) {
  const Dataset data = small_synthetic(3, 5);
  const SpanSet spans({10, 40, 200});
  const FeatureMatrix f = build_features(data, spans);
  for (auto k : {ModelKind::ols, ModelKind::knn, ModelKind::rf}) {
    const Pipeline p = fit_pipeline(spec_from_json(k, small_hyperparameters(k)), f);
    const Eigen::VectorXd batch = predict_pipeline(p, f);
    StreamPredictor stream(p);
    const std::size_t bytes = stream.state_bytes();
    for (std::size_t i = 0; i < data.size(); ++i) {
      EXPECT_NEAR(stream.push(data.samples()[i]), batch(static_cast<Eigen::Index>(i)), 1e-6) << to_string(k);
      ASSERT_EQ(stream.state_bytes(), bytes);
    }
  }
}

TEST(Hash, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}
