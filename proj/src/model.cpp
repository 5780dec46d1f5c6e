#include "pmtemp/model.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace pmtemp {

using nlohmann::json;

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ols: return "ols";
    case ModelKind::wls: return "wls";
    case ModelKind::knn: return "knn";
    case ModelKind::rf: return "rf";
    case ModelKind::et: return "et";
    case ModelKind::svr: return "svr";
    case ModelKind::mlp: return "mlp";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  for (auto k : {ModelKind::ols, ModelKind::wls, ModelKind::knn, ModelKind::rf, ModelKind::et, ModelKind::svr,
                 ModelKind::mlp}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown model type: " + s);
}

std::string display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::ols: return "OLS";
    case ModelKind::wls: return "WLS";
    case ModelKind::knn: return "k-NN";
    case ModelKind::rf: return "RF";
    case ModelKind::et: return "ET";
    case ModelKind::svr: return "SVR";
    case ModelKind::mlp: return "MLP";
  }
  return "?";
}

bool is_stochastic(ModelKind kind) {
  return kind == ModelKind::rf || kind == ModelKind::et || kind == ModelKind::mlp;
}

void ModelSpec::set_seed(std::uint64_t seed) {
  forest.seed = seed;
  svr.seed = seed;
  mlp.seed = seed;
}

json spec_to_json(const ModelSpec& s) {
  switch (s.kind) {
    case ModelKind::ols:
      return json::object();
    case ModelKind::wls:
      return {{"w_min", s.wls.w_min},
              {"w_max", s.wls.w_max},
              {"under_estimate_factor", s.wls.under_estimate_factor},
              {"max_irls_iterations", s.wls.max_irls_iterations}};
    case ModelKind::knn:
      return {{"neighbors", s.knn_neighbors}, {"weighting", to_string(s.knn_weighting)}};
    case ModelKind::rf:
    case ModelKind::et:
      return {{"estimators", s.forest.n_estimators},
              {"max_depth", s.forest.tree.max_depth},
              {"min_samples_split", s.forest.tree.min_samples_split},
              {"min_samples_leaf", s.forest.tree.min_samples_leaf},
              {"max_features", s.forest.tree.max_features},
              {"bootstrap", s.forest.bootstrap},
              {"seed", s.forest.seed}};
    case ModelKind::svr:
      return {{"C", s.svr.C},
              {"epsilon", s.svr.epsilon},
              {"gamma", s.svr.gamma},
              {"tolerance", s.svr.tolerance},
              {"max_iterations", s.svr.max_iterations},
              {"max_train_rows", s.svr.max_train_rows},
              {"seed", s.svr.seed}};
    case ModelKind::mlp:
      return {{"layers", s.mlp.layers},
              {"units", s.mlp.units},
              {"activation", to_string(s.mlp.activation)},
              {"dropout", s.mlp.dropout},
              {"l2", s.mlp.l2},
              {"learn_rate", s.mlp.learn_rate},
              {"optimizer", to_string(s.mlp.optimizer)},
              {"seed", s.mlp.seed},
              {"max_epochs", s.schedule.max_epochs},
              {"early_stop_patience", s.schedule.early_stop_patience},
              {"early_stop_min_delta", s.schedule.early_stop_min_delta},
              {"plateau_patience", s.schedule.plateau_patience},
              {"validation_fraction", s.schedule.validation_fraction}};
  }
  return json::object();
}

ModelSpec spec_from_json(ModelKind kind, const json& hp) {
  ModelSpec s;
  s.kind = kind;
  if (kind == ModelKind::et) s.forest.tree.mode = SplitMode::random_threshold;
  if (hp.is_null()) return s;
  if (!hp.is_object()) throw std::invalid_argument("hyperparameters must be a JSON object");
  const json known = spec_to_json(s);
  for (const auto& [key, value] : hp.items()) {
    if (!known.contains(key)) {
      throw std::invalid_argument("unknown hyperparameter '" + key + "' for model " + to_string(kind));
    }
  }
  auto get = [&hp](const char* key, auto& target) {
    if (hp.contains(key)) target = hp.at(key).get<std::decay_t<decltype(target)>>();
  };
  switch (kind) {
    case ModelKind::ols:
      break;
    case ModelKind::wls:
      get("w_min", s.wls.w_min);
      get("w_max", s.wls.w_max);
      get("under_estimate_factor", s.wls.under_estimate_factor);
      get("max_irls_iterations", s.wls.max_irls_iterations);
      break;
    case ModelKind::knn:
      get("neighbors", s.knn_neighbors);
      if (hp.contains("weighting")) s.knn_weighting = knn_weighting_from_string(hp.at("weighting").get<std::string>());
      break;
    case ModelKind::rf:
    case ModelKind::et:
      get("estimators", s.forest.n_estimators);
      get("max_depth", s.forest.tree.max_depth);
      get("min_samples_split", s.forest.tree.min_samples_split);
      get("min_samples_leaf", s.forest.tree.min_samples_leaf);
      get("max_features", s.forest.tree.max_features);
      get("bootstrap", s.forest.bootstrap);
      get("seed", s.forest.seed);
      break;
    case ModelKind::svr:
      get("C", s.svr.C);
      get("epsilon", s.svr.epsilon);
      get("gamma", s.svr.gamma);
      get("tolerance", s.svr.tolerance);
      get("max_iterations", s.svr.max_iterations);
      get("max_train_rows", s.svr.max_train_rows);
      get("seed", s.svr.seed);
      break;
    case ModelKind::mlp:
      get("layers", s.mlp.layers);
      get("units", s.mlp.units);
      if (hp.contains("activation")) s.mlp.activation = activation_from_string(hp.at("activation").get<std::string>());
      get("dropout", s.mlp.dropout);
      get("l2", s.mlp.l2);
      get("learn_rate", s.mlp.learn_rate);
      if (hp.contains("optimizer")) s.mlp.optimizer = optimizer_from_string(hp.at("optimizer").get<std::string>());
      get("seed", s.mlp.seed);
      get("max_epochs", s.schedule.max_epochs);
      get("early_stop_patience", s.schedule.early_stop_patience);
      get("early_stop_min_delta", s.schedule.early_stop_min_delta);
      get("plateau_patience", s.schedule.plateau_patience);
      get("validation_fraction", s.schedule.validation_fraction);
      validate(s.mlp);
      break;
  }
  return s;
}

Eigen::VectorXd TrainedModel::predict(const Eigen::MatrixXd& X, int jobs) const {
  return std::visit(
      [&](const auto& m) -> Eigen::VectorXd {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) return pmtemp::predict(m, X);
        else if constexpr (std::is_same_v<T, KnnModel>) return predict_knn(m, X, jobs);
        else if constexpr (std::is_same_v<T, Forest>) return predict_forest(m, X, jobs);
        else if constexpr (std::is_same_v<T, SvrModel>) return predict_svr(m, X, jobs);
        else return predict_mlp(m, X);
      },
      model);
}

double TrainedModel::predict_row(const Eigen::VectorXd& x) const {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) return pmtemp::predict_row(m, x);
        else if constexpr (std::is_same_v<T, KnnModel>) return predict_knn(m, x);
        else if constexpr (std::is_same_v<T, Forest>) return predict_forest(m, x);
        else if constexpr (std::is_same_v<T, SvrModel>) return predict_svr(m, x);
        else return predict_mlp(m, x);
      },
      model);
}

std::size_t TrainedModel::parameter_count() const {
  return std::visit([](const auto& m) { return m.parameter_count(); }, model);
}

TrainedModel fit_model(const ModelSpec& spec, const FeatureMatrix& train, int jobs) {
  TrainedModel out;
  out.kind = spec.kind;
  switch (spec.kind) {
    case ModelKind::ols:
      out.model = fit_ols(train.X, train.y);
      break;
    case ModelKind::wls:
      out.model = fit_wls_thermal(train.X, train.y, spec.wls);
      break;
    case ModelKind::knn:
      out.model = fit_knn(train.X, train.y, std::min<int>(spec.knn_neighbors, static_cast<int>(train.rows())),
                          spec.knn_weighting);
      break;
    case ModelKind::rf:
    case ModelKind::et: {
      ForestParams fp = spec.forest;
      fp.tree.mode = spec.kind == ModelKind::et ? SplitMode::random_threshold : SplitMode::best_split;
      out.model = fit_ensemble(train.X, train.y, fp, jobs);
      break;
    }
    case ModelKind::svr:
      out.model = fit_svr(train.X, train.y, spec.svr);
      break;
    case ModelKind::mlp:
      out.model = train_mlp(train.X, train.y, train.profiles, spec.mlp, spec.schedule);
      break;
  }
  return out;
}

Pipeline fit_pipeline(const ModelSpec& spec, const FeatureMatrix& raw_train, int jobs,
                      const ScalerFitHook& on_scaler_fit) {
  Pipeline p;
  p.spec = spec;
  p.spans = raw_train.spans;
  if (on_scaler_fit) on_scaler_fit(raw_train);
  p.scaler = fit_scaler(raw_train);
  p.model = fit_model(spec, apply_scaler(p.scaler, raw_train), jobs);
  return p;
}

Eigen::VectorXd predict_pipeline(const Pipeline& pipeline, const FeatureMatrix& raw_features, int jobs) {
  if (!(raw_features.spans == pipeline.spans)) throw std::invalid_argument("features were built with other spans");
  return pipeline.model.predict(apply_scaler(pipeline.scaler, raw_features).X, jobs);
}

// ---------------------------------------------------------------------------
// Artifact serialization

namespace {

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

// Row-major flattening.
template <typename Matrix>
json matrix_to_json(const Matrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) throw std::runtime_error("matrix size mismatch in artifact");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

json model_to_json(const TrainedModel& tm) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          return {{"coefficients", vector_to_json(m.coefficients)}, {"irls_iterations", m.irls_iterations}};
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          return {{"k", m.k}, {"weighting", to_string(m.weighting)}, {"X", matrix_to_json(m.X)}, {"y", vector_to_json(m.y)}};
        } else if constexpr (std::is_same_v<T, Forest>) {
          json trees = json::array();
          for (const auto& t : m.trees) {
            std::vector<int> feature, left, right;
            std::vector<double> threshold, value;
            std::vector<std::uint32_t> samples;
            for (const auto& n : t.nodes()) {
              feature.push_back(n.feature);
              threshold.push_back(n.threshold);
              left.push_back(n.left);
              right.push_back(n.right);
              value.push_back(n.value);
              samples.push_back(n.samples);
            }
            trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right},
                             {"value", value}, {"samples", samples}});
          }
          return {{"features", m.features}, {"trees", trees}};
        } else if constexpr (std::is_same_v<T, SvrModel>) {
          return {{"support_vectors", matrix_to_json(m.support_vectors)},
                  {"dual_coef", vector_to_json(m.dual_coef)},
                  {"bias", m.bias},
                  {"gamma", m.gamma},
                  {"converged", m.converged},
                  {"train_rows", m.train_rows}};
        } else {
          return {{"layer_sizes", m.net.layer_sizes()},
                  {"activation", to_string(m.net.activation())},
                  {"params", vector_to_json(m.net.params())},
                  {"y_mean", m.y_mean},
                  {"y_std", m.y_std},
                  {"best_epoch", m.best_epoch}};
        }
      },
      tm.model);
}

TrainedModel model_from_json(ModelKind kind, const ModelSpec& spec, const json& j) {
  TrainedModel tm;
  tm.kind = kind;
  switch (kind) {
    case ModelKind::ols:
    case ModelKind::wls: {
      LinearModel m;
      m.coefficients = vector_from_json(j.at("coefficients"));
      m.irls_iterations = j.value("irls_iterations", 0);
      tm.model = m;
      break;
    }
    case ModelKind::knn: {
      const Eigen::MatrixXd X = matrix_from_json(j.at("X"));
      tm.model = fit_knn(X, vector_from_json(j.at("y")), j.at("k").get<int>(),
                         knn_weighting_from_string(j.at("weighting").get<std::string>()));
      break;
    }
    case ModelKind::rf:
    case ModelKind::et: {
      Forest f;
      f.params = spec.forest;
      f.features = j.at("features").get<Eigen::Index>();
      for (const auto& t : j.at("trees")) {
        const auto feature = t.at("feature").get<std::vector<int>>();
        const auto threshold = t.at("threshold").get<std::vector<double>>();
        const auto left = t.at("left").get<std::vector<int>>();
        const auto right = t.at("right").get<std::vector<int>>();
        const auto value = t.at("value").get<std::vector<double>>();
        const auto samples = t.at("samples").get<std::vector<std::uint32_t>>();
        std::vector<TreeNode> nodes(feature.size());
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          nodes[i] = {feature.at(i), threshold.at(i), left.at(i), right.at(i), value.at(i), samples.at(i)};
        }
        f.trees.emplace_back(std::move(nodes));
      }
      tm.model = std::move(f);
      break;
    }
    case ModelKind::svr: {
      SvrModel m;
      m.support_vectors = matrix_from_json(j.at("support_vectors"));
      m.dual_coef = vector_from_json(j.at("dual_coef"));
      m.bias = j.at("bias").get<double>();
      m.gamma = j.at("gamma").get<double>();
      m.converged = j.value("converged", true);
      m.train_rows = j.value("train_rows", std::size_t{0});
      tm.model = m;
      break;
    }
    case ModelKind::mlp: {
      MlpModel m;
      m.config = spec.mlp;
      m.net = Mlp(j.at("layer_sizes").get<std::vector<int>>(), activation_from_string(j.at("activation").get<std::string>()));
      const Eigen::VectorXd params = vector_from_json(j.at("params"));
      if (params.size() != m.net.params().size()) throw std::runtime_error("MLP parameter count mismatch in artifact");
      m.net.params() = params;
      m.y_mean = j.at("y_mean").get<double>();
      m.y_std = j.at("y_std").get<double>();
      m.best_epoch = j.value("best_epoch", -1);
      tm.model = std::move(m);
      break;
    }
  }
  return tm;
}

}  // namespace

json pipeline_to_json(const Pipeline& p) {
  return {{"format", "pmtemp-artifact"},
          {"version", 1},
          {"type", to_string(p.model.kind)},
          {"hyperparameters", spec_to_json(p.spec)},
          {"spans", p.spans.values()},
          {"feature_names", p.scaler.names},
          {"scaler",
           {{"names", p.scaler.names},
            {"source_index", p.scaler.source_index},
            {"mean", vector_to_json(p.scaler.mean)},
            {"std", vector_to_json(p.scaler.stddev)},
            {"dropped", p.scaler.dropped},
            {"id", p.scaler.id}}},
          {"parameter_count", p.model.parameter_count()},
          {"config_hash", p.config_hash},
          {"model", model_to_json(p.model)}};
}

Pipeline pipeline_from_json(const json& doc) {
  if (doc.value("format", std::string{}) != "pmtemp-artifact") throw std::runtime_error("not a model artifact");
  Pipeline p;
  const auto kind = model_kind_from_string(doc.at("type").get<std::string>());
  p.spec = spec_from_json(kind, doc.at("hyperparameters"));
  p.spans = SpanSet(doc.at("spans").get<std::vector<int>>());
  const auto& s = doc.at("scaler");
  p.scaler.names = s.at("names").get<std::vector<std::string>>();
  p.scaler.source_index = s.at("source_index").get<std::vector<std::size_t>>();
  p.scaler.mean = vector_from_json(s.at("mean"));
  p.scaler.stddev = vector_from_json(s.at("std"));
  p.scaler.dropped = s.at("dropped").get<std::vector<std::string>>();
  p.scaler.id = s.at("id").get<std::string>();
  p.config_hash = doc.value("config_hash", std::string{});
  p.model = model_from_json(kind, p.spec, doc.at("model"));
  return p;
}

void save_artifact(const Pipeline& pipeline, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write artifact: " + path.string());
  out << pipeline_to_json(pipeline).dump() << '\n';
}

Pipeline load_artifact(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open artifact: " + path.string());
  return pipeline_from_json(json::parse(in));
}

StreamPredictor::StreamPredictor(const Pipeline& pipeline) : pipeline_(pipeline), stream_(pipeline.spans) {}

double StreamPredictor::push(const RawSample& sample) {
  if (!sample.profile_id.empty() && sample.profile_id != profile_) {
    if (!profile_.empty()) stream_.reset();
    profile_ = sample.profile_id;
  }
  const auto& row = stream_.push(sample);
  return pipeline_.model.predict_row(apply_scaler_row(pipeline_.scaler, row));
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace pmtemp
