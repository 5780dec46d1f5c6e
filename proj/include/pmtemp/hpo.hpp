#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmtemp/features.hpp"
#include "pmtemp/gp.hpp"
#include "pmtemp/model.hpp"
#include "pmtemp/random.hpp"

namespace pmtemp {

enum class DimensionKind { real, log_real, integer, log_integer, categorical };

std::string to_string(DimensionKind kind);
DimensionKind dimension_kind_from_string(const std::string& s);

struct Dimension {
  std::string name;
  DimensionKind kind = DimensionKind::real;
  double low = 0.0;
  double high = 1.0;
  std::vector<nlohmann::json> choices;  // categorical only
};

/// A point is a JSON object {name: value}; integers are JSON integers and
/// categorical values are the choices themselves.
using Point = nlohmann::json;

/// Search box. Span dimensions (span_1 .. span_n) are log-integers that are
/// kept strictly increasing.
class HpoSpace {
 public:
  void add_real(const std::string& name, double low, double high, bool log_scale = false);
  void add_integer(const std::string& name, std::int64_t low, std::int64_t high, bool log_scale = false);
  void add_categorical(const std::string& name, std::vector<nlohmann::json> choices);
  void add_spans(int count = 4, std::int64_t low = 4, std::int64_t high = 10800);

  const std::vector<Dimension>& dimensions() const { return dims_; }
  std::size_t span_count() const { return span_dims_.size(); }
  /// Length of encoded vectors (one-hot columns count individually).
  Eigen::Index encoded_size() const;

  /// Maps into [0, 1]^m. Throws std::invalid_argument for missing names,
  /// out-of-bounds values, unknown choices or unordered spans.
  Eigen::VectorXd encode(const Point& point) const;
  /// Clamps, rounds integers, picks the largest one-hot entry and repairs spans.
  Point decode(const Eigen::VectorXd& u) const;
  /// One unit coordinate per dimension (not per one-hot column).
  Point from_unit(const std::vector<double>& unit) const;
  Point sample(Rng& rng) const;
  bool contains(const Point& point) const;

  nlohmann::json to_json() const;
  static HpoSpace from_json(const nlohmann::json& doc);

 private:
  void repair_spans(Point& point) const;

  std::vector<Dimension> dims_;
  std::vector<std::size_t> span_dims_;
};

/// Latin hypercube design in unit coordinates, mapped through from_unit.
std::vector<Point> latin_hypercube(const HpoSpace& space, int n, Rng& rng);

/// Default search space of a model family: spans plus the family's
/// hyperparameter intervals.
HpoSpace default_space(ModelKind kind);
/// Published optimum hyperparameters of a family (empty for OLS / WLS).
nlohmann::json reference_optimum(ModelKind kind);

/// Separates span_i entries from the model hyperparameters.
std::pair<std::optional<SpanSet>, nlohmann::json> split_point(const Point& point);

struct SuggestOptions {
  int pool_size = 1000;
  int perturbations = 10;
  double perturbation_scale = 0.1;
  int refine_steps = 30;
  double xi = 0.0;
  double kappa = 1.96;
};

struct Suggestion {
  Point point;
  std::string source;  // "ei", "pi", "ucb" or "random"
  std::array<Point, 3> proposals;
  std::array<double, 3> consensus{};
};

/// Each acquisition proposes the maximizer over a seeded candidate pool plus
/// incumbent perturbations, refined by local search. The proposal with the
/// largest mean min-max-normalized score across all three acquisitions wins.
/// Falls back to a random point when the surrogate is unusable.
Suggestion suggest(const GaussianProcess& gp, const HpoSpace& space, double best, const Point* incumbent, Rng& rng,
                   const SuggestOptions& options = {});

struct Trial {
  int index = 0;
  std::string source;
  Point point;
  double value = 0.0;     // objective, NaN when failed
  double imputed = 0.0;   // value used for bookkeeping (worst * 1.5 when failed)
  bool failed = false;
  std::string error;
  double best_so_far = 0.0;

  nlohmann::json to_json() const;
  static Trial from_json(const nlohmann::json& j);
};

struct HpoOptions {
  int n_init = 30;
  int n_iter = 100;
  std::uint64_t seed = 0;
  SuggestOptions suggest;
  GpFitOptions gp;
  /// Fit the surrogate on log(1 + value).
  bool log_transform = true;
  /// JSONL history; existing trials are loaded and the run continues after them.
  std::filesystem::path history_path;
  std::function<void(const Trial&)> on_trial;
};

struct HpoResult {
  std::vector<Trial> history;
  int best_index = -1;
  int resumed = 0;  // trials loaded from the history file

  const Trial& best() const { return history.at(static_cast<std::size_t>(best_index)); }
};

/// Objective failures are exceptions or non-finite values.
using Objective = std::function<double(const Point&)>;

/// n_init Latin hypercube trials, then n_iter surrogate-guided trials.
/// Trial i draws from Rng(seed, i), so a resumed run matches an
/// uninterrupted one.
HpoResult optimize(const Objective& objective, const HpoSpace& space, const HpoOptions& options);

std::vector<Trial> load_history(const std::filesystem::path& path);

}  // namespace pmtemp
