#include "pmtemp/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pmtemp/eval.hpp"
#include "pmtemp/hpo.hpp"
#include "pmtemp/thermal_network.hpp"

namespace pmtemp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<int> kDefaultSpans = {1320, 3360, 6360, 9480};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

json best_file(const ExperimentConfig& config) {
  const auto path = config.raw.contains("best") ? config.resolve(config.raw.at("best").get<std::string>())
                                                : config.out / "best.json";
  return read_json(path);
}

json metrics_json(const Metrics& m) {
  return {{"mse", m.mse}, {"mae", m.mae}, {"r2", m.r2_defined ? json(m.r2) : json(nullptr)}, {"linf", m.linf}};
}

void write_predictions(const fs::path& path, const FeatureMatrix& features, const Eigen::VectorXd& y_hat) {
  auto out = open_out(path);
  out << "profile_id,timestamp_index,pm,pm_hat,residual\n";
  for (const auto& span : features.profiles) {
    for (std::size_t i = span.begin; i < span.end; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      out << span.id << ',' << (i - span.begin) << ',' << features.y(r) << ',' << y_hat(r) << ','
          << features.y(r) - y_hat(r) << '\n';
    }
  }
}

DatasetSplit load_split(const ExperimentConfig& config, bool require_test) {
  const Dataset data = load_dataset(config.dataset_path(), config.sample_rate_hz());
  const auto test_ids = config.test_profiles();
  if (require_test && test_ids.empty()) throw std::invalid_argument("config needs test_profiles");
  return split_profiles(data, test_ids);
}

std::string format_size(std::size_t n) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(1);
  if (n >= 1000000) s << static_cast<double>(n) / 1e6 << 'M';
  else if (n >= 1000) s << static_cast<double>(n) / 1e3 << 'k';
  else return std::to_string(n);
  return s.str();
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig ExperimentConfig::from_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig c;
  c.raw = doc;
  c.base_dir = base_dir;
  c.seed = doc.value("seed", std::uint64_t{0});
  c.out = c.resolve(doc.value("out", std::string{"results"}));
  c.jobs = doc.value("jobs", 1);
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  return from_json(read_json(path), path.parent_path());
}

fs::path ExperimentConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

fs::path ExperimentConfig::dataset_path() const {
  if (!raw.contains("dataset")) throw std::invalid_argument("config needs a dataset path");
  const auto path = resolve(raw.at("dataset").get<std::string>());
  if (!fs::exists(path)) throw std::invalid_argument("dataset not found: " + path.string());
  return path;
}

double ExperimentConfig::sample_rate_hz() const { return raw.value("sample_rate_hz", 2.0); }

ModelKind ExperimentConfig::model() const { return model_kind_from_string(raw.value("model", std::string{"ols"})); }

std::set<std::string> ExperimentConfig::test_profiles() const {
  std::set<std::string> ids;
  for (const auto& v : raw.value("test_profiles", json::array())) ids.insert(v.is_string() ? v.get<std::string>() : v.dump());
  return ids;
}

std::string ExperimentConfig::hash() const {
  json doc = raw;
  doc["seed"] = seed;
  return fnv1a_hex(doc.dump());
}

SpanSet resolve_spans(const ExperimentConfig& config) {
  if (!config.raw.contains("spans")) return SpanSet(kDefaultSpans);
  const auto& s = config.raw.at("spans");
  if (s.is_string()) {
    if (s.get<std::string>() != "best") throw std::invalid_argument("spans must be a list or \"best\"");
    return SpanSet(best_file(config).at("spans").get<std::vector<int>>());
  }
  return SpanSet(s.get<std::vector<int>>());
}

ModelSpec resolve_spec(const ExperimentConfig& config) {
  const ModelKind kind = config.model();
  json hp = json::object();
  if (config.raw.contains("hyperparameters")) {
    const auto& h = config.raw.at("hyperparameters");
    if (h.is_string()) {
      const auto mode = h.get<std::string>();
      if (mode == "optimum") hp = reference_optimum(kind);
      else if (mode == "best") hp = best_file(config).at("hyperparameters");
      else throw std::invalid_argument("hyperparameters must be an object, \"optimum\" or \"best\"");
    } else {
      hp = h;
    }
  }
  ModelSpec spec = spec_from_json(kind, hp);
  spec.set_seed(config.seed);
  return spec;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_synth(const ExperimentConfig& config, std::ostream& log) {
  SyntheticConfig sc;
  const json s = config.raw.value("synth", json::object());
  sc.duration_s = s.value("duration_s", sc.duration_s);
  sc.sample_rate_hz = s.value("sample_rate_hz", sc.sample_rate_hz);
  sc.profiles = s.value("profiles", std::size_t{4});
  sc.ambient_c = s.value("ambient_c", sc.ambient_c);
  sc.coolant_c = s.value("coolant_c", sc.coolant_c);
  sc.excitation = s.value("excitation", sc.excitation);
  sc.max_speed_rpm = s.value("max_speed_rpm", sc.max_speed_rpm);
  sc.max_current_a = s.value("max_current_a", sc.max_current_a);
  sc.min_hold_s = s.value("min_hold_s", sc.min_hold_s);
  sc.max_hold_s = s.value("max_hold_s", sc.max_hold_s);
  sc.standstill_s = s.value("standstill_s", sc.standstill_s);
  sc.profile_prefix = s.value("profile_prefix", sc.profile_prefix);
  auto& n = sc.network;
  n.stator_time_constant_s = s.value("stator_time_constant_s", n.stator_time_constant_s);
  n.magnet_time_constant_s = s.value("magnet_time_constant_s", n.magnet_time_constant_s);
  n.stator_coolant_conductance = s.value("stator_coolant_conductance", n.stator_coolant_conductance);
  n.stator_magnet_conductance = s.value("stator_magnet_conductance", n.stator_magnet_conductance);
  n.magnet_ambient_conductance = s.value("magnet_ambient_conductance", n.magnet_ambient_conductance);

  fs::create_directories(config.out);
  const Dataset data = generate_synthetic(sc, config.seed);
  const auto path = config.out / s.value("file", std::string{"synthetic.csv"});
  save_dataset(data, path);
  log << "wrote " << data.size() << " samples in " << data.profiles().size() << " profiles to " << path.string()
      << '\n';
  return 0;
}

int cmd_tune(const ExperimentConfig& config, std::ostream& log) {
  const DatasetSplit split = load_split(config, false);
  const ModelKind kind = config.model();
  const json h = config.raw.value("hpo", json::object());

  HpoSpace space;
  if (h.contains("space")) {
    space = HpoSpace::from_json(h.at("space"));
  } else {
    space = default_space(kind);
  }
  const int k = config.raw.value("folds", 3);
  const FoldPlan plan = make_fold_plan(split.train, k, config.seed);
  const std::optional<SpanSet> fixed_spans =
      config.raw.contains("spans") && config.raw.at("spans").is_array() && space.span_count() == 0
          ? std::optional<SpanSet>(resolve_spans(config))
          : std::nullopt;

  HpoOptions options;
  options.n_init = h.value("n_init", 30);
  options.n_iter = h.value("n_iter", 100);
  options.seed = config.seed;
  fs::create_directories(config.out);
  options.history_path = h.contains("history") ? config.resolve(h.at("history").get<std::string>())
                                               : config.out / "history.jsonl";
  options.on_trial = [&log](const Trial& t) {
    log << "trial " << t.index << " [" << t.source << "] ";
    if (t.failed) log << "failed: " << t.error;
    else log << "cv_mse=" << t.value << " best=" << t.best_so_far;
    log << '\n';
  };

  const Objective objective = [&](const Point& point) {
    auto [spans, hp] = split_point(point);
    if (!spans) spans = fixed_spans ? fixed_spans : SpanSet(kDefaultSpans);
    ModelSpec spec = spec_from_json(kind, hp);
    spec.set_seed(config.seed);
    return cross_validate(spec, split.train, *spans, plan, config.jobs).mean_mse;
  };
  const HpoResult result = optimize(objective, space, options);
  if (result.resumed >= options.n_init + options.n_iter) log << "history complete, no new trials\n";
  if (result.best_index < 0) {
    log << "every trial failed\n";
    return 1;
  }
  const Trial& best = result.best();
  auto [spans, hp] = split_point(best.point);
  if (!spans) spans = fixed_spans ? fixed_spans : SpanSet(kDefaultSpans);
  write_json(config.out / "best.json", {{"model", to_string(kind)},
                                        {"spans", spans->values()},
                                        {"hyperparameters", hp},
                                        {"cv_mse", best.value},
                                        {"trial", best.index},
                                        {"trials", result.history.size()},
                                        {"config_hash", config.hash()}});
  log << "best cv_mse " << best.value << " at trial " << best.index << '\n';
  return 0;
}

TrainOutcome train_best_of(const ExperimentConfig& config, const ModelSpec& base, const SpanSet& spans,
                           const Dataset& train, const Dataset& test) {
  const FeatureMatrix train_features = build_features(train, spans);
  const FeatureMatrix test_features = build_features(test, spans);
  const bool stochastic = is_stochastic(base.kind) || (base.kind == ModelKind::svr && base.svr.max_train_rows > 0);
  const int reps = stochastic ? std::max(1, config.raw.value("repetitions", 10)) : 1;

  TrainOutcome outcome;
  for (int r = 0; r < reps; ++r) {
    ModelSpec spec = base;
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(r);
    spec.set_seed(seed);
    Pipeline p = fit_pipeline(spec, train_features, config.jobs);
    const double mse = compute_metrics(test_features.y, predict_pipeline(p, test_features, config.jobs)).mse;
    outcome.seeds.push_back(seed);
    outcome.test_mse.push_back(mse);
    if (r == 0 || mse < outcome.test_mse[outcome.best_seed_index]) {
      outcome.best_seed_index = static_cast<std::size_t>(r);
      outcome.pipeline = std::move(p);
    }
  }
  outcome.pipeline.config_hash = config.hash();
  return outcome;
}

int cmd_train(const ExperimentConfig& config, std::ostream& log) {
  const DatasetSplit split = load_split(config, true);
  const ModelSpec spec = resolve_spec(config);
  const SpanSet spans = resolve_spans(config);
  const TrainOutcome outcome = train_best_of(config, spec, spans, split.train, split.test);
  const Pipeline& p = outcome.pipeline;

  const FeatureMatrix test_features = build_features(split.test, spans);
  const Eigen::VectorXd y_hat = predict_pipeline(p, test_features, config.jobs);
  const Metrics m = compute_metrics(test_features.y, y_hat);

  fs::create_directories(config.out);
  save_artifact(p, config.out / "model.json");
  write_predictions(config.out / "predictions.csv", test_features, y_hat);
  {
    auto out = open_out(config.out / "seeds.csv");
    out << "seed,test_mse,selected\n";
    for (std::size_t i = 0; i < outcome.seeds.size(); ++i) {
      out << outcome.seeds[i] << ',' << outcome.test_mse[i] << ',' << (i == outcome.best_seed_index) << '\n';
    }
  }
  {
    auto out = open_out(config.out / "metrics.csv");
    write_metrics_csv_header(out);
    write_metrics_csv_row(out, display_name(spec.kind), "test", m, p.model.parameter_count());
  }
  json doc = metrics_json(m);
  doc["model"] = to_string(spec.kind);
  doc["display"] = display_name(spec.kind);
  doc["parameters"] = p.model.parameter_count();
  doc["spans"] = spans.values();
  doc["hyperparameters"] = spec_to_json(p.spec);
  doc["seeds"] = outcome.seeds;
  doc["seed_test_mse"] = outcome.test_mse;
  doc["selected_seed"] = outcome.seeds[outcome.best_seed_index];
  doc["config_hash"] = p.config_hash;
  write_json(config.out / "metrics.json", doc);
  log << display_name(spec.kind) << " test mse=" << m.mse << " mae=" << m.mae << " r2=" << m.r2
      << " linf=" << m.linf << " parameters=" << p.model.parameter_count() << '\n';
  return 0;
}

int cmd_eval(const ExperimentConfig& config, const fs::path& artifact, std::ostream& log) {
  const Pipeline p = load_artifact(artifact.empty() ? config.out / "model.json" : artifact);
  Dataset data = load_dataset(config.dataset_path(), config.sample_rate_hz());
  const auto ids = config.test_profiles();
  if (!ids.empty()) data = data.subset(ids);
  const FeatureMatrix features = build_features(data, p.spans);
  const Eigen::VectorXd y_hat = predict_pipeline(p, features, config.jobs);
  const Metrics m = compute_metrics(features.y, y_hat);
  fs::create_directories(config.out);
  write_predictions(config.out / "eval_predictions.csv", features, y_hat);
  json doc = metrics_json(m);
  doc["model"] = to_string(p.model.kind);
  doc["parameters"] = p.model.parameter_count();
  doc["samples"] = features.rows();
  write_json(config.out / "eval_metrics.json", doc);
  log << display_name(p.model.kind) << " mse=" << m.mse << " mae=" << m.mae << " r2=" << m.r2 << " linf=" << m.linf
      << '\n';
  return 0;
}

int cmd_learncurve(const ExperimentConfig& config, std::ostream& log) {
  const DatasetSplit split = load_split(config, true);
  const ModelSpec spec = resolve_spec(config);
  const SpanSet spans = resolve_spans(config);
  const json lc = config.raw.value("learncurve", json::object());
  const auto fractions = lc.value("fractions", std::vector<double>{0.125, 0.25, 0.5, 0.75, 1.0});
  const int repeats = lc.value("repeats", 10);
  const LearnCurve curve = learn_curve(spec, split.train, split.test, spans, fractions, repeats, config.seed, config.jobs);
  for (const auto& w : curve.warnings) log << "warning: " << w << '\n';
  fs::create_directories(config.out);
  auto out = open_out(config.out / "learncurve.csv");
  out << "model,fraction,mean_mse,std_mse,repeats\n";
  for (const auto& p : curve.points) {
    out << display_name(spec.kind) << ',' << p.fraction << ',' << p.mean_mse << ',' << p.std_mse << ','
        << p.mse.size() << '\n';
    log << "fraction " << p.fraction << ": mse " << p.mean_mse << " +- " << p.std_mse << '\n';
  }
  return 0;
}

int cmd_pca(const ExperimentConfig& config, std::ostream& log) {
  const Dataset data = load_dataset(config.dataset_path(), config.sample_rate_hz());
  const SpanSet spans = resolve_spans(config);
  const json pc = config.raw.value("pca", json::object());
  const int components = pc.value("components", 2);
  const auto stride = std::max<std::size_t>(1, pc.value("stride", std::size_t{1}));
  const FeatureMatrix features = build_features(data, spans);
  const FeatureMatrix scaled = apply_scaler(fit_scaler(features), features);
  const PcaResult r = pca_project(scaled.X, components);

  fs::create_directories(config.out);
  auto out = open_out(config.out / "pca.csv");
  out << "profile_id,pm";
  for (int c = 0; c < components; ++c) out << ",pc" << c + 1;
  out << '\n';
  for (const auto& span : features.profiles) {
    for (std::size_t i = span.begin; i < span.end; i += stride) {
      const auto row = static_cast<Eigen::Index>(i);
      out << span.id << ',' << features.y(row);
      for (int c = 0; c < components; ++c) out << ',' << r.scores(row, c);
      out << '\n';
    }
  }
  write_json(config.out / "pca.json",
             {{"explained_variance", std::vector<double>(r.explained_variance.data(),
                                                         r.explained_variance.data() + r.explained_variance.size())},
              {"explained_ratio", std::vector<double>(r.explained_ratio.data(),
                                                      r.explained_ratio.data() + r.explained_ratio.size())},
              {"features", scaled.names}});
  log << "explained variance ratio:";
  for (Eigen::Index c = 0; c < r.explained_ratio.size(); ++c) log << ' ' << r.explained_ratio(c);
  log << '\n';
  return 0;
}

int cmd_report(const fs::path& results_dir, const std::vector<std::string>& expected, std::ostream& log) {
  struct Row {
    std::string model;
    std::string display;
    fs::path dir;
    json metrics;
  };
  std::vector<Row> rows;
  std::vector<fs::path> dirs = {results_dir};
  if (fs::is_directory(results_dir)) {
    for (const auto& entry : fs::directory_iterator(results_dir)) {
      if (entry.is_directory()) dirs.push_back(entry.path());
    }
  } else {
    throw std::invalid_argument("results directory not found: " + results_dir.string());
  }
  std::sort(dirs.begin() + 1, dirs.end());
  for (const auto& dir : dirs) {
    const auto path = dir / "metrics.json";
    if (!fs::exists(path)) continue;
    const json m = read_json(path);
    rows.push_back({m.value("model", std::string{"?"}), m.value("display", m.value("model", std::string{"?"})), dir, m});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.metrics.at("mse").get<double>() > b.metrics.at("mse").get<double>();
  });

  std::vector<std::string> missing;
  for (const auto& e : expected) {
    const bool found = std::any_of(rows.begin(), rows.end(), [&](const Row& r) { return r.model == e; });
    if (!found) missing.push_back(e);
  }

  std::ofstream md(results_dir / "report.md");
  md << "| Model | MSE in °C² | MAE in °C | R² | ℓ∞ norm in °C | model size |\n";
  md << "|---|---|---|---|---|---|\n";
  auto bench = open_out(results_dir / "benchmark.csv");
  bench << "model,mse,mae,r2,linf,parameters\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    const std::string r2 = m.at("r2").is_number() ? fixed(m.at("r2").get<double>(), 2) : "n/a";
    md << "| " << r.display << " | " << fixed(m.at("mse").get<double>(), 2) << " | "
       << fixed(m.at("mae").get<double>(), 2) << " | " << r2 << " | " << fixed(m.at("linf").get<double>(), 2)
       << " | " << format_size(m.value("parameters", std::size_t{0})) << " |\n";
    bench << r.display << ',' << m.at("mse").get<double>() << ',' << m.at("mae").get<double>() << ','
          << (m.at("r2").is_number() ? std::to_string(m.at("r2").get<double>()) : "nan") << ','
          << m.at("linf").get<double>() << ',' << m.value("parameters", std::size_t{0}) << '\n';
  }
  if (!missing.empty()) {
    md << "\nMissing runs:";
    for (const auto& m : missing) md << ' ' << m;
    md << '\n';
  }

  auto residuals = open_out(results_dir / "residuals.csv");
  residuals << "model,pm,residual\n";
  auto traces = open_out(results_dir / "traces.csv");
  traces << "model,profile_id,timestamp_index,pm,pm_hat,residual\n";
  auto curves = open_out(results_dir / "learncurves.csv");
  curves << "model,fraction,mean_mse,std_mse,repeats\n";
  for (const auto& r : rows) {
    std::ifstream pred(r.dir / "predictions.csv");
    std::string line;
    std::getline(pred, line);
    while (std::getline(pred, line)) {
      if (line.empty()) continue;
      traces << r.display << ',' << line << '\n';
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
      if (cells.size() == 5) residuals << r.display << ',' << cells[2] << ',' << cells[4] << '\n';
    }
  }
  for (const auto& dir : dirs) {
    std::ifstream lc(dir / "learncurve.csv");
    std::string line;
    if (!std::getline(lc, line)) continue;
    while (std::getline(lc, line)) {
      if (!line.empty()) curves << line << '\n';
    }
  }

  log << rows.size() << " run(s) in report";
  if (!missing.empty()) log << ", " << missing.size() << " missing";
  log << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// Streaming inference

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_number(std::string_view cell, const std::string& column) {
  cell = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() || !std::isfinite(v)) {
    throw std::invalid_argument("bad value '" + std::string(cell) + "' in column " + column);
  }
  return v;
}

}  // namespace

std::size_t infer_stream(const Pipeline& pipeline, std::istream& in, std::ostream& out, std::ostream& errors) {
  std::string line;
  if (!std::getline(in, line)) return 0;
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  std::map<std::string, std::size_t> column;
  const auto header = split_csv(line);
  for (std::size_t i = 0; i < header.size(); ++i) column[std::string(trim(header[i]))] = i;

  const std::vector<std::string> inputs = {"ambient", "coolant", "u_d", "u_q", "motor_speed", "i_d", "i_q"};
  std::vector<std::size_t> index;
  for (const auto& name : inputs) {
    const auto it = column.find(name);
    if (it == column.end()) throw SchemaError(name);
    index.push_back(it->second);
  }
  const auto pid = column.find("profile_id");

  StreamPredictor predictor(pipeline);
  std::size_t bad = 0;
  char buffer[64];
  for (std::size_t row = 0; std::getline(in, line); ++row) {
    if (trim(line).empty()) {
      --row;
      continue;
    }
    try {
      const auto cells = split_csv(line);
      if (cells.size() != header.size()) {
        throw std::invalid_argument("expected " + std::to_string(header.size()) + " cells, got " +
                                    std::to_string(cells.size()));
      }
      RawSample s;
      s.ambient = parse_number(cells[index[0]], inputs[0]);
      s.coolant = parse_number(cells[index[1]], inputs[1]);
      s.u_d = parse_number(cells[index[2]], inputs[2]);
      s.u_q = parse_number(cells[index[3]], inputs[3]);
      s.motor_speed = parse_number(cells[index[4]], inputs[4]);
      s.i_d = parse_number(cells[index[5]], inputs[5]);
      s.i_q = parse_number(cells[index[6]], inputs[6]);
      if (pid != column.end()) s.profile_id = std::string(trim(cells[pid->second]));
      const double y_hat = predictor.push(s);
      std::snprintf(buffer, sizeof(buffer), "%zu,%.12g\n", row, y_hat);
      out << buffer;
    } catch (const std::exception& e) {
      ++bad;
      errors << "error,row " << row << ": " << e.what() << '\n';
    }
  }
  out.flush();
  return bad;
}

}  // namespace pmtemp
