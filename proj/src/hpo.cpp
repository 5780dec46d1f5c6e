#include "pmtemp/hpo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pmtemp {

using nlohmann::json;

std::string to_string(DimensionKind kind) {
  switch (kind) {
    case DimensionKind::real: return "real";
    case DimensionKind::log_real: return "log_real";
    case DimensionKind::integer: return "integer";
    case DimensionKind::log_integer: return "log_integer";
    case DimensionKind::categorical: return "categorical";
  }
  return "?";
}

DimensionKind dimension_kind_from_string(const std::string& s) {
  for (auto k : {DimensionKind::real, DimensionKind::log_real, DimensionKind::integer, DimensionKind::log_integer,
                 DimensionKind::categorical}) {
    if (to_string(k) == s) return k;
  }
  throw std::invalid_argument("unknown dimension type: " + s);
}

namespace {

bool is_log(DimensionKind k) { return k == DimensionKind::log_real || k == DimensionKind::log_integer; }
bool is_int(DimensionKind k) { return k == DimensionKind::integer || k == DimensionKind::log_integer; }

void check_bounds(const std::string& name, double low, double high, bool log_scale) {
  if (!(low <= high) || !std::isfinite(low) || !std::isfinite(high)) {
    throw std::invalid_argument("dimension " + name + ": bounds out of order");
  }
  if (log_scale && low <= 0.0) throw std::invalid_argument("dimension " + name + ": log bounds must be positive");
}

double scaled(const Dimension& d, double x) {
  if (d.high == d.low) return 0.0;
  if (is_log(d.kind)) return (std::log(x) - std::log(d.low)) / (std::log(d.high) - std::log(d.low));
  return (x - d.low) / (d.high - d.low);
}

double unscaled(const Dimension& d, double u) {
  u = std::clamp(u, 0.0, 1.0);
  double x = is_log(d.kind) ? std::exp(std::log(d.low) + u * (std::log(d.high) - std::log(d.low)))
                            : d.low + u * (d.high - d.low);
  if (is_int(d.kind)) x = std::round(x);
  return std::clamp(x, d.low, d.high);
}

json number_value(const Dimension& d, double x) {
  if (is_int(d.kind)) return static_cast<std::int64_t>(x);
  return x;
}

}  // namespace

void HpoSpace::add_real(const std::string& name, double low, double high, bool log_scale) {
  check_bounds(name, low, high, log_scale);
  dims_.push_back({name, log_scale ? DimensionKind::log_real : DimensionKind::real, low, high, {}});
}

void HpoSpace::add_integer(const std::string& name, std::int64_t low, std::int64_t high, bool log_scale) {
  check_bounds(name, static_cast<double>(low), static_cast<double>(high), log_scale);
  dims_.push_back({name, log_scale ? DimensionKind::log_integer : DimensionKind::integer, static_cast<double>(low),
                   static_cast<double>(high), {}});
}

void HpoSpace::add_categorical(const std::string& name, std::vector<json> choices) {
  if (choices.empty()) throw std::invalid_argument("dimension " + name + ": no choices");
  dims_.push_back({name, DimensionKind::categorical, 0.0, 0.0, std::move(choices)});
}

void HpoSpace::add_spans(int count, std::int64_t low, std::int64_t high) {
  if (count < 1) throw std::invalid_argument("span group needs at least one span");
  if (high - low + 1 < count) throw std::invalid_argument("span range too narrow for strictly increasing spans");
  if (low < 1) throw std::invalid_argument("spans must be >= 1");
  if (!span_dims_.empty()) throw std::invalid_argument("span group already defined");
  for (int i = 0; i < count; ++i) {
    span_dims_.push_back(dims_.size());
    add_integer("span_" + std::to_string(i + 1), low, high, true);
  }
}

Eigen::Index HpoSpace::encoded_size() const {
  Eigen::Index m = 0;
  for (const auto& d : dims_) m += d.kind == DimensionKind::categorical ? static_cast<Eigen::Index>(d.choices.size()) : 1;
  return m;
}

Eigen::VectorXd HpoSpace::encode(const Point& point) const {
  if (!point.is_object()) throw std::invalid_argument("point must be a JSON object");
  Eigen::VectorXd u = Eigen::VectorXd::Zero(encoded_size());
  Eigen::Index col = 0;
  for (const auto& d : dims_) {
    if (!point.contains(d.name)) throw std::invalid_argument("point lacks dimension " + d.name);
    const json& v = point.at(d.name);
    if (d.kind == DimensionKind::categorical) {
      const auto it = std::find(d.choices.begin(), d.choices.end(), v);
      if (it == d.choices.end()) throw std::invalid_argument("dimension " + d.name + ": unknown choice " + v.dump());
      u(col + (it - d.choices.begin())) = 1.0;
      col += static_cast<Eigen::Index>(d.choices.size());
      continue;
    }
    if (!v.is_number()) throw std::invalid_argument("dimension " + d.name + ": value is not a number");
    const double x = v.get<double>();
    if (!(x >= d.low && x <= d.high)) throw std::invalid_argument("dimension " + d.name + ": value out of bounds");
    if (is_int(d.kind) && std::abs(x - std::round(x)) > 1e-9) {
      throw std::invalid_argument("dimension " + d.name + ": value is not an integer");
    }
    u(col++) = scaled(d, x);
  }
  for (std::size_t i = 1; i < span_dims_.size(); ++i) {
    if (point.at(dims_[span_dims_[i]].name).get<double>() <= point.at(dims_[span_dims_[i - 1]].name).get<double>()) {
      throw std::invalid_argument("span values must be strictly increasing");
    }
  }
  return u;
}

void HpoSpace::repair_spans(Point& point) const {
  if (span_dims_.empty()) return;
  std::vector<std::int64_t> s;
  for (auto i : span_dims_) s.push_back(point.at(dims_[i].name).get<std::int64_t>());
  std::sort(s.begin(), s.end());
  const auto low = static_cast<std::int64_t>(dims_[span_dims_.front()].low);
  const auto high = static_cast<std::int64_t>(dims_[span_dims_.front()].high);
  const auto n = static_cast<std::int64_t>(s.size());
  for (std::int64_t i = 1; i < n; ++i) s[i] = std::max(s[i], s[i - 1] + 1);
  for (std::int64_t i = n - 1; i >= 0; --i) {
    s[i] = std::min(s[i], high - (n - 1 - i));
    if (i + 1 < n) s[i] = std::min(s[i], s[i + 1] - 1);
  }
  for (std::int64_t i = 0; i < n; ++i) s[i] = std::max(s[i], low + i);
  for (std::size_t i = 0; i < span_dims_.size(); ++i) point[dims_[span_dims_[i]].name] = s[i];
}

Point HpoSpace::decode(const Eigen::VectorXd& u) const {
  if (u.size() != encoded_size()) throw std::invalid_argument("encoded vector has wrong length");
  Point point = json::object();
  Eigen::Index col = 0;
  for (const auto& d : dims_) {
    if (d.kind == DimensionKind::categorical) {
      Eigen::Index arg = 0;
      u.segment(col, static_cast<Eigen::Index>(d.choices.size())).maxCoeff(&arg);
      point[d.name] = d.choices[static_cast<std::size_t>(arg)];
      col += static_cast<Eigen::Index>(d.choices.size());
    } else {
      point[d.name] = number_value(d, unscaled(d, u(col++)));
    }
  }
  repair_spans(point);
  return point;
}

Point HpoSpace::from_unit(const std::vector<double>& unit) const {
  if (unit.size() != dims_.size()) throw std::invalid_argument("unit vector has wrong length");
  Point point = json::object();
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    const auto& d = dims_[i];
    const double u = std::clamp(unit[i], 0.0, std::nextafter(1.0, 0.0));
    if (d.kind == DimensionKind::categorical) {
      point[d.name] = d.choices[static_cast<std::size_t>(u * static_cast<double>(d.choices.size()))];
    } else if (d.kind == DimensionKind::integer) {
      point[d.name] = static_cast<std::int64_t>(std::min(d.low + std::floor(u * (d.high - d.low + 1.0)), d.high));
    } else if (d.kind == DimensionKind::log_integer) {
      const double x = std::exp(std::log(d.low) + u * (std::log(d.high + 1.0) - std::log(d.low)));
      point[d.name] = static_cast<std::int64_t>(std::clamp(std::floor(x), d.low, d.high));
    } else {
      point[d.name] = unscaled(d, u);
    }
  }
  repair_spans(point);
  return point;
}

Point HpoSpace::sample(Rng& rng) const {
  std::vector<double> unit(dims_.size());
  for (auto& u : unit) u = rng.uniform();
  return from_unit(unit);
}

bool HpoSpace::contains(const Point& point) const {
  try {
    encode(point);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

json HpoSpace::to_json() const {
  json dims = json::array();
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (std::find(span_dims_.begin(), span_dims_.end(), i) != span_dims_.end()) continue;
    const auto& d = dims_[i];
    json j = {{"name", d.name}, {"type", to_string(d.kind)}};
    if (d.kind == DimensionKind::categorical) {
      j["choices"] = d.choices;
    } else {
      j["low"] = number_value(d, d.low);
      j["high"] = number_value(d, d.high);
    }
    dims.push_back(j);
  }
  json doc = {{"dimensions", dims}};
  if (!span_dims_.empty()) {
    const auto& d = dims_[span_dims_.front()];
    doc["spans"] = {{"count", span_dims_.size()}, {"low", static_cast<std::int64_t>(d.low)},
                    {"high", static_cast<std::int64_t>(d.high)}};
  }
  return doc;
}

HpoSpace HpoSpace::from_json(const json& doc) {
  HpoSpace space;
  if (doc.contains("spans") && !doc.at("spans").is_null()) {
    const auto& s = doc.at("spans");
    space.add_spans(s.value("count", 4), s.value("low", std::int64_t{4}), s.value("high", std::int64_t{10800}));
  }
  for (const auto& j : doc.value("dimensions", json::array())) {
    const auto name = j.at("name").get<std::string>();
    const auto kind = dimension_kind_from_string(j.at("type").get<std::string>());
    switch (kind) {
      case DimensionKind::real:
      case DimensionKind::log_real:
        space.add_real(name, j.at("low").get<double>(), j.at("high").get<double>(), kind == DimensionKind::log_real);
        break;
      case DimensionKind::integer:
      case DimensionKind::log_integer:
        space.add_integer(name, j.at("low").get<std::int64_t>(), j.at("high").get<std::int64_t>(),
                          kind == DimensionKind::log_integer);
        break;
      case DimensionKind::categorical:
        space.add_categorical(name, j.at("choices").get<std::vector<json>>());
        break;
    }
  }
  return space;
}

std::vector<Point> latin_hypercube(const HpoSpace& space, int n, Rng& rng) {
  const std::size_t dims = space.dimensions().size();
  std::vector<std::vector<double>> unit(static_cast<std::size_t>(std::max(n, 0)), std::vector<double>(dims));
  for (std::size_t d = 0; d < dims; ++d) {
    std::vector<std::size_t> strata(unit.size());
    std::iota(strata.begin(), strata.end(), 0);
    rng.shuffle(strata);
    for (std::size_t i = 0; i < unit.size(); ++i) {
      unit[i][d] = (static_cast<double>(strata[i]) + rng.uniform()) / static_cast<double>(unit.size());
    }
  }
  std::vector<Point> points;
  for (const auto& u : unit) points.push_back(space.from_unit(u));
  return points;
}

HpoSpace default_space(ModelKind kind) {
  HpoSpace space;
  space.add_spans(4, 4, 10800);
  switch (kind) {
    case ModelKind::ols:
    case ModelKind::wls:
      break;
    case ModelKind::knn:
      space.add_integer("neighbors", 1, 2048, true);
      space.add_categorical("weighting", {"uniform", "distance"});
      break;
    case ModelKind::rf:
    case ModelKind::et:
      space.add_integer("estimators", 10, 600);
      space.add_integer("max_depth", 10, 60);
      space.add_integer("min_samples_split", 2, 20);
      space.add_integer("min_samples_leaf", 1, 10);
      space.add_categorical("bootstrap", {true, false});
      break;
    case ModelKind::svr:
      space.add_real("C", 1e-3, 10.0, true);
      space.add_real("epsilon", 1e-2, 1.0);
      break;
    case ModelKind::mlp:
      space.add_integer("layers", 1, 3);
      space.add_integer("units", 4, 32);
      space.add_categorical("activation", {"selu", "relu"});
      space.add_real("dropout", 0.0, 0.3);
      space.add_real("l2", 1e-9, 0.1, true);
      space.add_real("learn_rate", 1e-6, 0.1, true);
      space.add_categorical("optimizer", {"radam", "adam", "nadam", "adamax", "rmsprop", "sgd"});
      break;
  }
  return space;
}

json reference_optimum(ModelKind kind) {
  switch (kind) {
    case ModelKind::ols:
    case ModelKind::wls:
      return json::object();
    case ModelKind::knn:
      return {{"neighbors", 2048}, {"weighting", "distance"}};
    case ModelKind::rf:
      return {{"estimators", 93}, {"max_depth", 60}, {"min_samples_split", 15}, {"min_samples_leaf", 2},
              {"bootstrap", true}};
    case ModelKind::et:
      return {{"estimators", 600}, {"max_depth", 53}, {"min_samples_split", 20}, {"min_samples_leaf", 7},
              {"bootstrap", true}};
    case ModelKind::svr:
      return {{"C", 1.56}, {"epsilon", 0.11}};
    case ModelKind::mlp:
      return {{"layers", 1},   {"units", 16},        {"activation", "relu"}, {"dropout", 0.13},
              {"l2", 1.7e-8}, {"learn_rate", 5.8e-3}, {"optimizer", "adam"}};
  }
  return json::object();
}

std::pair<std::optional<SpanSet>, json> split_point(const Point& point) {
  json hp = json::object();
  std::vector<std::pair<int, int>> spans;
  for (const auto& [key, value] : point.items()) {
    if (key.rfind("span_", 0) == 0) {
      spans.emplace_back(std::stoi(key.substr(5)), value.get<int>());
    } else {
      hp[key] = value;
    }
  }
  if (spans.empty()) return {std::nullopt, hp};
  std::sort(spans.begin(), spans.end());
  std::vector<int> values;
  for (const auto& s : spans) values.push_back(s.second);
  return {SpanSet(values), hp};
}

// ---------------------------------------------------------------------------
// Suggestion

namespace {

constexpr std::array<AcquisitionKind, 3> kAcquisitions = {AcquisitionKind::ei, AcquisitionKind::pi,
                                                           AcquisitionKind::ucb};

struct Scored {
  Eigen::VectorXd u;
  std::array<double, 3> score{};
};

Scored score(const GaussianProcess& gp, const Eigen::VectorXd& u, double best, const SuggestOptions& o) {
  Scored s{u, {}};
  const auto post = gp.predict(u);
  for (std::size_t a = 0; a < 3; ++a) s.score[a] = acquisition(post.mean, post.stddev, best, kAcquisitions[a], o.xi, o.kappa);
  return s;
}

Eigen::VectorXd snap(const HpoSpace& space, const Eigen::VectorXd& u) {
  return space.encode(space.decode(u.cwiseMax(0.0).cwiseMin(1.0)));
}

Eigen::VectorXd jitter(const Eigen::VectorXd& u, double scale, Rng& rng) {
  Eigen::VectorXd v = u;
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += scale * rng.normal();
  return v;
}

}  // namespace

Suggestion suggest(const GaussianProcess& gp, const HpoSpace& space, double best, const Point* incumbent, Rng& rng,
                   const SuggestOptions& options) {
  Suggestion out;
  if (!gp.ok()) {
    out.point = space.sample(rng);
    out.source = "random";
    out.proposals.fill(out.point);
    return out;
  }

  std::vector<Scored> pool;
  pool.reserve(static_cast<std::size_t>(options.pool_size + options.perturbations));
  for (int i = 0; i < options.pool_size; ++i) pool.push_back(score(gp, space.encode(space.sample(rng)), best, options));
  if (incumbent) {
    const Eigen::VectorXd base = space.encode(*incumbent);
    for (int i = 0; i < options.perturbations; ++i) {
      pool.push_back(score(gp, snap(space, jitter(base, options.perturbation_scale, rng)), best, options));
    }
  }
  if (pool.empty()) pool.push_back(score(gp, space.encode(space.sample(rng)), best, options));

  std::array<double, 3> lo, hi;
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  for (const auto& s : pool) {
    for (std::size_t a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], s.score[a]);
      hi[a] = std::max(hi[a], s.score[a]);
    }
  }

  std::array<Scored, 3> proposals;
  for (std::size_t a = 0; a < 3; ++a) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < pool.size(); ++i) {
      if (pool[i].score[a] > pool[arg].score[a]) arg = i;
    }
    Scored current = pool[arg];
    double step = 0.05;
    for (int r = 0; r < options.refine_steps; ++r, step *= 0.9) {
      Scored trial = score(gp, snap(space, jitter(current.u, step, rng)), best, options);
      if (trial.score[a] > current.score[a]) current = std::move(trial);
    }
    proposals[a] = std::move(current);
  }

  std::size_t winner = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    double total = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
      const double range = hi[a] - lo[a];
      total += range > 0.0 ? std::clamp((proposals[p].score[a] - lo[a]) / range, 0.0, 1.0) : 0.0;
    }
    out.consensus[p] = total / 3.0;
    out.proposals[p] = space.decode(proposals[p].u);
    if (out.consensus[p] > out.consensus[winner]) winner = p;
  }
  out.point = out.proposals[winner];
  out.source = to_string(kAcquisitions[winner]);
  return out;
}

// ---------------------------------------------------------------------------
// Optimization loop

json Trial::to_json() const {
  json j = {{"index", index}, {"source", source}, {"point", point}, {"failed", failed}};
  j["value"] = failed ? json(nullptr) : json(value);
  j["imputed"] = std::isfinite(imputed) ? json(imputed) : json(nullptr);
  j["best_so_far"] = std::isfinite(best_so_far) ? json(best_so_far) : json(nullptr);
  if (!error.empty()) j["error"] = error;
  return j;
}

Trial Trial::from_json(const json& j) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  auto number = [&](const char* key) {
    return j.contains(key) && j.at(key).is_number() ? j.at(key).get<double>() : nan;
  };
  Trial t;
  t.index = j.at("index").get<int>();
  t.source = j.value("source", std::string{});
  t.point = j.at("point");
  t.failed = j.value("failed", false);
  t.value = t.failed ? nan : number("value");
  t.imputed = number("imputed");
  t.best_so_far = number("best_so_far");
  t.error = j.value("error", std::string{});
  return t;
}

std::vector<Trial> load_history(const std::filesystem::path& path) {
  std::vector<Trial> trials;
  std::ifstream in(path);
  if (!in) return trials;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Trial t = Trial::from_json(json::parse(line));
    if (t.index != static_cast<int>(trials.size())) {
      throw std::runtime_error("history " + path.string() + ": trial " + std::to_string(t.index) + " out of sequence");
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

HpoResult optimize(const Objective& objective, const HpoSpace& space, const HpoOptions& options) {
  if (options.n_init < 1 || options.n_iter < 0) throw std::invalid_argument("optimize: need n_init >= 1, n_iter >= 0");
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  HpoResult result;
  if (!options.history_path.empty()) result.history = load_history(options.history_path);
  result.resumed = static_cast<int>(result.history.size());
  for (const auto& t : result.history) {
    if (!space.contains(t.point)) throw std::runtime_error("history point outside the search space");
  }

  std::ofstream log;
  if (!options.history_path.empty()) {
    log.open(options.history_path, std::ios::app);
    if (!log) throw std::runtime_error("cannot write history: " + options.history_path.string());
  }

  Rng design_rng(options.seed, 0x1A7E5);
  const auto design = latin_hypercube(space, options.n_init, design_rng);
  const int total = options.n_init + options.n_iter;

  for (int i = static_cast<int>(result.history.size()); i < total; ++i) {
    Rng rng(options.seed, static_cast<std::uint64_t>(i));
    Trial trial;
    trial.index = i;
    if (i < options.n_init) {
      trial.point = design[static_cast<std::size_t>(i)];
      trial.source = "init";
    } else {
      std::vector<const Trial*> ok;
      for (const auto& t : result.history) {
        if (!t.failed) ok.push_back(&t);
      }
      GaussianProcess gp;
      const Point* incumbent = nullptr;
      double best = std::numeric_limits<double>::infinity();
      if (ok.size() >= 2) {
        Eigen::MatrixXd X(static_cast<Eigen::Index>(ok.size()), space.encoded_size());
        Eigen::VectorXd y(static_cast<Eigen::Index>(ok.size()));
        // log1p only applies to non-negative objectives such as an MSE.
        bool use_log = options.log_transform;
        for (const auto* t : ok) use_log = use_log && t->value >= 0.0;
        auto transform = [use_log](double v) { return use_log ? std::log1p(v) : v; };
        for (std::size_t r = 0; r < ok.size(); ++r) {
          X.row(static_cast<Eigen::Index>(r)) = space.encode(ok[r]->point).transpose();
          y(static_cast<Eigen::Index>(r)) = transform(ok[r]->value);
          if (y(static_cast<Eigen::Index>(r)) < best) {
            best = y(static_cast<Eigen::Index>(r));
            incumbent = &ok[r]->point;
          }
        }
        GpFitOptions gp_options = options.gp;
        gp_options.seed = mix_seed(options.seed, static_cast<std::uint64_t>(i));
        gp.fit(X, y, gp_options);
      }
      Suggestion s = suggest(gp, space, best, incumbent, rng, options.suggest);
      trial.point = std::move(s.point);
      trial.source = s.source;
    }

    try {
      trial.value = objective(trial.point);
      if (!std::isfinite(trial.value)) {
        trial.failed = true;
        trial.error = "non-finite objective";
      }
    } catch (const std::exception& e) {
      trial.failed = true;
      trial.error = e.what();
    }

    double worst = nan;
    double best_so_far = nan;
    for (const auto& t : result.history) {
      if (t.failed) continue;
      if (!(worst >= t.value)) worst = t.value;
      if (!(best_so_far <= t.value)) best_so_far = t.value;
    }
    if (trial.failed) {
      trial.value = nan;
      if (!std::isnan(worst)) trial.imputed = worst >= 0.0 ? worst * 1.5 : worst / 1.5;
      else trial.imputed = nan;
    } else {
      trial.imputed = trial.value;
      if (!(best_so_far <= trial.value)) best_so_far = trial.value;
    }
    trial.best_so_far = best_so_far;

    if (log.is_open()) log << trial.to_json().dump() << std::endl;
    if (options.on_trial) options.on_trial(trial);
    result.history.push_back(std::move(trial));
  }

  for (std::size_t i = 0; i < result.history.size(); ++i) {
    const auto& t = result.history[i];
    if (t.failed) continue;
    if (result.best_index < 0 || t.value < result.history[static_cast<std::size_t>(result.best_index)].value) {
      result.best_index = static_cast<int>(i);
    }
  }
  return result;
}

}  // namespace pmtemp
