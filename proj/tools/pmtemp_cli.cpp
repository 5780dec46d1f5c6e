#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>

#include "pmtemp/commands.hpp"
#include "pmtemp/data.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Permanent magnet temperature estimation experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<int> jobs;
  app.add_option("--config", config_path, "Experiment config (JSON)");
  app.add_option("--seed", seed, "Random seed (overrides config)");
  app.add_option("--out", out_dir, "Output directory (overrides config)");
  app.add_option("--jobs", jobs, "Worker threads (overrides config)")->check(CLI::PositiveNumber);

  std::string artifact;
  std::vector<std::string> expected;
  std::string results_dir;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset from the thermal network");
  auto* tune = app.add_subcommand("tune", "Bayesian hyperparameter search on cross-validation MSE");
  auto* train = app.add_subcommand("train", "Fit on training profiles, score on test profiles, save the model");
  auto* eval = app.add_subcommand("eval", "Score a saved model on the configured profiles");
  eval->add_option("--model", artifact, "Model artifact (default <out>/model.json)");
  auto* learncurve = app.add_subcommand("learncurve", "Test MSE versus training-set size");
  auto* pca = app.add_subcommand("pca", "Project standardized features on principal components");
  auto* infer = app.add_subcommand("infer", "Stream CSV rows from stdin, write timestamp_index,pm_hat to stdout");
  infer->add_option("--model", artifact, "Model artifact")->required();
  auto* report = app.add_subcommand("report", "Benchmark table and plot data from finished runs");
  report->add_option("dir", results_dir, "Results directory (default --out)");
  report->add_option("--expect", expected, "Model types that should have runs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (infer->parsed()) {
      const pmtemp::Pipeline pipeline = pmtemp::load_artifact(artifact);
      pmtemp::infer_stream(pipeline, std::cin, std::cout, std::cerr);
      return 0;
    }

    pmtemp::ExperimentConfig config =
        config_path.empty() ? pmtemp::ExperimentConfig::from_json(nlohmann::json::object(), fs::current_path())
                            : pmtemp::ExperimentConfig::load(config_path);
    if (seed) config.seed = *seed;
    if (!out_dir.empty()) config.out = out_dir;
    if (jobs) config.jobs = *jobs;

    if (synth->parsed()) return pmtemp::cmd_synth(config, std::cerr);
    if (tune->parsed()) return pmtemp::cmd_tune(config, std::cerr);
    if (train->parsed()) return pmtemp::cmd_train(config, std::cerr);
    if (eval->parsed()) return pmtemp::cmd_eval(config, artifact, std::cerr);
    if (learncurve->parsed()) return pmtemp::cmd_learncurve(config, std::cerr);
    if (pca->parsed()) return pmtemp::cmd_pca(config, std::cerr);
    if (report->parsed()) {
      return pmtemp::cmd_report(results_dir.empty() ? config.out : fs::path(results_dir), expected, std::cerr);
    }
  } catch (const pmtemp::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
