#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <variant>

#include "json.hpp"
#include "pmtemp/features.hpp"
#include "pmtemp/forest.hpp"
#include "pmtemp/linmodel.hpp"
#include "pmtemp/mlp.hpp"
#include "pmtemp/neighbors.hpp"
#include "pmtemp/svr.hpp"

namespace pmtemp {

enum class ModelKind { ols, wls, knn, rf, et, svr, mlp };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);
/// Display name used in benchmark tables (OLS, WLS, k-NN, RF, ET, SVR, MLP).
std::string display_name(ModelKind kind);
/// Models whose fit depends on a random seed.
bool is_stochastic(ModelKind kind);

/// Model family plus every hyperparameter the family needs.
struct ModelSpec {
  ModelKind kind = ModelKind::ols;
  ThermalWeightConfig wls;
  int knn_neighbors = 16;
  KnnWeighting knn_weighting = KnnWeighting::uniform;
  ForestParams forest;
  SvrParams svr;
  MlpConfig mlp;
  TrainSchedule schedule;

  /// Sets the seed of whichever stochastic component the family uses.
  void set_seed(std::uint64_t seed);
};

nlohmann::json spec_to_json(const ModelSpec& spec);
/// Reads hyperparameters over the family's defaults; unknown keys are rejected.
ModelSpec spec_from_json(ModelKind kind, const nlohmann::json& hyperparameters);

using ModelVariant = std::variant<LinearModel, KnnModel, Forest, SvrModel, MlpModel>;

struct TrainedModel {
  ModelKind kind = ModelKind::ols;
  ModelVariant model;

  Eigen::VectorXd predict(const Eigen::MatrixXd& X, int jobs = 1) const;
  double predict_row(const Eigen::VectorXd& x) const;
  std::size_t parameter_count() const;
};

/// Fits on standardized features. Profile spans are used by the MLP's
/// validation split.
TrainedModel fit_model(const ModelSpec& spec, const FeatureMatrix& scaled_train, int jobs = 1);

/// Span set, scaler and model: everything needed to turn raw samples into
/// predictions.
struct Pipeline {
  ModelSpec spec;
  SpanSet spans;
  Scaler scaler;
  TrainedModel model;
  std::string config_hash;
};

using ScalerFitHook = std::function<void(const FeatureMatrix& rows_used)>;

/// Fits scaler and model on raw (unscaled) features of the training profiles.
Pipeline fit_pipeline(const ModelSpec& spec, const FeatureMatrix& raw_train, int jobs = 1,
                      const ScalerFitHook& on_scaler_fit = {});

Eigen::VectorXd predict_pipeline(const Pipeline& pipeline, const FeatureMatrix& raw_features, int jobs = 1);

nlohmann::json pipeline_to_json(const Pipeline& pipeline);
Pipeline pipeline_from_json(const nlohmann::json& doc);
void save_artifact(const Pipeline& pipeline, const std::filesystem::path& path);
Pipeline load_artifact(const std::filesystem::path& path);

/// Streaming predictor: constant memory per stream, resets at profile changes
/// when a profile id is given.
class StreamPredictor {
 public:
  explicit StreamPredictor(const Pipeline& pipeline);
  double push(const RawSample& sample);
  void reset() { stream_.reset(); }
  std::size_t state_bytes() const { return stream_.state_bytes() + sizeof(*this); }

 private:
  const Pipeline& pipeline_;
  FeatureStream stream_;
  std::string profile_;
};

/// 64-bit FNV-1a of a string, hex encoded.
std::string fnv1a_hex(const std::string& text);

}  // namespace pmtemp
