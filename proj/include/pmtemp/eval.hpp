#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "pmtemp/data.hpp"
#include "pmtemp/features.hpp"
#include "pmtemp/model.hpp"

namespace pmtemp {

struct Metrics {
  double mse = 0.0;   // degC^2
  double mae = 0.0;   // degC
  double r2 = 0.0;    // NaN when the targets are constant
  double linf = 0.0;  // degC
  bool r2_defined = true;
};

/// Throws std::invalid_argument on empty or mismatched inputs.
Metrics compute_metrics(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat);

/// Profiles grouped into k folds, stratified by max-temperature level.
struct FoldPlan {
  std::vector<std::vector<std::string>> folds;
  std::map<std::string, int> levels;  // profile id -> level 0..3

  std::size_t k() const { return folds.size(); }
  std::set<std::string> fold_ids(std::size_t fold) const;
  std::set<std::string> training_ids(std::size_t fold) const;
};

/// Levels are quartiles of the per-profile max target. Within each level,
/// profiles (seed-shuffled, then largest first) go to the fold holding the
/// fewest profiles of that level, then fewest profiles, then fewest samples.
FoldPlan make_fold_plan(const Dataset& dataset, int k = 3, std::uint64_t seed = 0);

/// Throws std::invalid_argument unless the folds partition the dataset's profiles.
void validate_plan(const FoldPlan& plan, const Dataset& dataset);

struct FoldResult {
  std::size_t fold = 0;
  Metrics metrics;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t parameter_count = 0;
};

struct CvResult {
  std::vector<FoldResult> folds;
  double mean_mse = 0.0;
};

/// Features are built once; per fold the scaler and model see only the
/// training folds. `on_scaler_fit` receives the rows the scaler is fit on.
CvResult cross_validate(const ModelSpec& spec, const Dataset& dataset, const SpanSet& spans, const FoldPlan& plan,
                        int jobs = 1, const ScalerFitHook& on_scaler_fit = {});

struct LearnCurvePoint {
  double fraction = 0.0;
  std::vector<double> mse;  // one per repeat
  std::vector<std::size_t> profile_counts;
  double mean_mse = 0.0;
  double std_mse = 0.0;  // sample standard deviation
};

struct LearnCurve {
  std::vector<LearnCurvePoint> points;
  std::vector<std::string> warnings;
};

/// For every fraction and repeat, whole training profiles are drawn without
/// replacement while their hours fit in fraction * total hours; the model is
/// fit on them and scored on the fixed test set.
LearnCurve learn_curve(const ModelSpec& spec, const Dataset& train, const Dataset& test, const SpanSet& spans,
                       const std::vector<double>& fractions, int repeats = 10, std::uint64_t seed = 0, int jobs = 1);

struct PcaResult {
  Eigen::MatrixXd scores;      // n x c
  Eigen::MatrixXd components;  // p x c, unit columns
  Eigen::VectorXd mean;
  Eigen::VectorXd explained_variance;
  Eigen::VectorXd explained_ratio;
};

/// Covariance eigendecomposition. Each component's largest-magnitude loading
/// is positive.
PcaResult pca_project(const Eigen::MatrixXd& X, int components = 2);

void write_metrics_csv_header(std::ostream& out);
void write_metrics_csv_row(std::ostream& out, const std::string& model, const std::string& split,
                           const Metrics& metrics, std::size_t parameter_count);

}  // namespace pmtemp
