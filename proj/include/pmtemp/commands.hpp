#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmtemp/model.hpp"

namespace pmtemp {

/// Experiment description read from a JSON config file.
///
///   dataset          CSV path (relative paths resolve against the config file)
///   sample_rate_hz   default 2
///   test_profiles    ids held out for testing
///   model            ols | wls | knn | rf | et | svr | mlp
///   spans            [s1, ...] | "best" (from best.json of a tune run)
///   hyperparameters  {...} | "optimum" (published optimum) | "best"
///   seed, out, jobs  overridable from the command line
///   repetitions      seeds tried by train for stochastic models (default 10)
///   folds            CV folds for tune (default 3)
///   hpo              {n_init, n_iter, space, history}
///   learncurve       {fractions, repeats}
///   pca              {components}
///   synth            synthetic generator settings
struct ExperimentConfig {
  nlohmann::json raw = nlohmann::json::object();
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;
  std::filesystem::path out = "results";
  int jobs = 1;

  static ExperimentConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);

  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path dataset_path() const;
  double sample_rate_hz() const;
  ModelKind model() const;
  std::set<std::string> test_profiles() const;
  /// Stable hash of the config (with the effective seed).
  std::string hash() const;
};

/// Resolves spans and hyperparameters, reading best.json under `out` when asked.
SpanSet resolve_spans(const ExperimentConfig& config);
ModelSpec resolve_spec(const ExperimentConfig& config);

struct TrainOutcome {
  Pipeline pipeline;
  std::vector<std::uint64_t> seeds;
  std::vector<double> test_mse;  // per seed
  std::size_t best_seed_index = 0;
};

int cmd_synth(const ExperimentConfig& config, std::ostream& log);
int cmd_tune(const ExperimentConfig& config, std::ostream& log);
int cmd_train(const ExperimentConfig& config, std::ostream& log);
int cmd_eval(const ExperimentConfig& config, const std::filesystem::path& artifact, std::ostream& log);
int cmd_learncurve(const ExperimentConfig& config, std::ostream& log);
int cmd_pca(const ExperimentConfig& config, std::ostream& log);
int cmd_report(const std::filesystem::path& results_dir, const std::vector<std::string>& expected, std::ostream& log);

/// Reads CSV with a header (dataset columns minus pm; profile_id optional)
/// and writes "timestamp_index,pm_hat" per sample. Malformed rows produce a
/// line on `errors` and are skipped. A change of profile_id resets the filters.
/// Returns the number of malformed rows.
std::size_t infer_stream(const Pipeline& pipeline, std::istream& in, std::ostream& out, std::ostream& errors);

/// Runs train with all seeds and keeps the lowest test MSE.
TrainOutcome train_best_of(const ExperimentConfig& config, const ModelSpec& spec, const SpanSet& spans,
                           const Dataset& train, const Dataset& test);

}  // namespace pmtemp
