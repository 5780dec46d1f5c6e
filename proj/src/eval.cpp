#include "pmtemp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "pmtemp/parallel.hpp"
#include "pmtemp/random.hpp"

namespace pmtemp {

std::set<std::string> FoldPlan::fold_ids(std::size_t fold) const {
  return {folds.at(fold).begin(), folds.at(fold).end()};
}

std::set<std::string> FoldPlan::training_ids(std::size_t fold) const {
  std::set<std::string> ids;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != fold) ids.insert(folds[f].begin(), folds[f].end());
  }
  return ids;
}

FoldPlan make_fold_plan(const Dataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("fold plan needs k >= 2");
  const auto ids = dataset.profile_ids();
  if (ids.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("fold plan: " + std::to_string(ids.size()) + " profiles for " + std::to_string(k) +
                                " folds");
  }

  struct Entry {
    std::string id;
    double max_target;
    std::size_t size;
  };
  std::vector<Entry> entries;
  for (const auto& id : ids) {
    const auto& span = dataset.profile(id);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = span.begin; i < span.end; ++i) mx = std::max(mx, dataset.samples()[i].pm);
    entries.push_back({id, mx, span.size()});
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.max_target != b.max_target ? a.max_target < b.max_target : a.id < b.id;
  });

  constexpr int kLevels = 4;
  FoldPlan plan;
  plan.folds.resize(static_cast<std::size_t>(k));
  std::vector<std::vector<Entry>> by_level(kLevels);
  const std::size_t n = entries.size();
  for (std::size_t rank = 0; rank < n; ++rank) {
    const int level = std::min(kLevels - 1, static_cast<int>(kLevels * rank / n));
    plan.levels[entries[rank].id] = level;
    by_level[static_cast<std::size_t>(level)].push_back(entries[rank]);
  }

  Rng rng(seed);
  std::vector<std::size_t> samples(static_cast<std::size_t>(k), 0);
  for (auto& level : by_level) {
    rng.shuffle(level);
    std::stable_sort(level.begin(), level.end(), [](const Entry& a, const Entry& b) { return a.size > b.size; });
    std::vector<int> level_count(static_cast<std::size_t>(k), 0);
    for (const auto& e : level) {
      std::size_t best = 0;
      for (std::size_t f = 1; f < plan.folds.size(); ++f) {
        const auto key = [&](std::size_t i) {
          return std::make_tuple(level_count[i], plan.folds[i].size(), samples[i]);
        };
        if (key(f) < key(best)) best = f;
      }
      plan.folds[best].push_back(e.id);
      ++level_count[best];
      samples[best] += e.size;
    }
  }
  return plan;
}

void validate_plan(const FoldPlan& plan, const Dataset& dataset) {
  std::set<std::string> seen;
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    if (plan.folds[f].empty()) throw std::invalid_argument("fold " + std::to_string(f) + " is empty");
    for (const auto& id : plan.folds[f]) {
      if (!dataset.has_profile(id)) throw std::invalid_argument("fold plan names unknown profile " + id);
      if (!seen.insert(id).second) throw std::invalid_argument("profile " + id + " appears in more than one fold");
    }
  }
  for (const auto& id : dataset.profile_ids()) {
    if (!seen.count(id)) throw std::invalid_argument("profile " + id + " is in no fold");
  }
}

CvResult cross_validate(const ModelSpec& spec, const Dataset& dataset, const SpanSet& spans, const FoldPlan& plan,
                        int jobs, const ScalerFitHook& on_scaler_fit) {
  validate_plan(plan, dataset);
  const FeatureMatrix features = build_features(dataset, spans);
  const std::size_t k = plan.k();
  const int outer = std::min<int>(std::max(jobs, 1), static_cast<int>(k));
  const int inner = std::max(1, jobs / outer);

  CvResult result;
  result.folds.resize(k);
  parallel_for(k, outer, [&](std::size_t f) {
    const FeatureMatrix train = select_profiles(features, plan.training_ids(f));
    const FeatureMatrix test = select_profiles(features, plan.fold_ids(f));
    const Pipeline pipeline = fit_pipeline(spec, train, inner, on_scaler_fit);
    FoldResult& r = result.folds[f];
    r.fold = f;
    r.metrics = compute_metrics(test.y, predict_pipeline(pipeline, test, inner));
    r.train_rows = static_cast<std::size_t>(train.rows());
    r.test_rows = static_cast<std::size_t>(test.rows());
    r.parameter_count = pipeline.model.parameter_count();
  });
  for (const auto& r : result.folds) result.mean_mse += r.metrics.mse;
  result.mean_mse /= static_cast<double>(k);
  return result;
}

LearnCurve learn_curve(const ModelSpec& spec, const Dataset& train, const Dataset& test, const SpanSet& spans,
                       const std::vector<double>& fractions, int repeats, std::uint64_t seed, int jobs) {
  if (repeats < 1) throw std::invalid_argument("learn curve needs at least one repeat");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("learn curve fractions must lie in (0, 1]");
  }
  const FeatureMatrix train_features = build_features(train, spans);
  const FeatureMatrix test_features = build_features(test, spans);
  const auto ids = train.profile_ids();
  const double total = static_cast<double>(train.size());

  const std::size_t reps = static_cast<std::size_t>(repeats);
  const std::size_t tasks = fractions.size() * reps;
  std::vector<double> mse(tasks, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> counts(tasks, 0);
  const int outer = std::min<int>(std::max(jobs, 1), static_cast<int>(std::max<std::size_t>(tasks, 1)));
  const int inner = std::max(1, jobs / outer);

  parallel_for(tasks, outer, [&](std::size_t t) {
    const std::size_t fi = t / reps;
    Rng rng(seed, t);
    auto order = ids;
    rng.shuffle(order);
    const double budget = fractions[fi] * total * (1.0 + 1e-12);
    std::set<std::string> chosen;
    double used = 0.0;
    for (const auto& id : order) {
      const auto size = static_cast<double>(train.profile(id).size());
      if (used + size <= budget) {
        chosen.insert(id);
        used += size;
      }
    }
    counts[t] = chosen.size();
    if (chosen.empty()) return;
    const Pipeline pipeline = fit_pipeline(spec, select_profiles(train_features, chosen), inner);
    mse[t] = compute_metrics(test_features.y, predict_pipeline(pipeline, test_features, inner)).mse;
  });

  LearnCurve curve;
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    LearnCurvePoint point;
    point.fraction = fractions[fi];
    for (std::size_t r = 0; r < reps; ++r) {
      const std::size_t t = fi * reps + r;
      if (counts[t] == 0) continue;
      point.mse.push_back(mse[t]);
      point.profile_counts.push_back(counts[t]);
    }
    if (point.mse.size() < reps) {
      curve.warnings.push_back("fraction " + std::to_string(fractions[fi]) + ": " +
                               std::to_string(reps - point.mse.size()) + " repeat(s) drew no whole profile");
    }
    if (point.mse.empty()) continue;
    const double n = static_cast<double>(point.mse.size());
    point.mean_mse = std::accumulate(point.mse.begin(), point.mse.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : point.mse) ss += (v - point.mean_mse) * (v - point.mean_mse);
    point.std_mse = point.mse.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    curve.points.push_back(std::move(point));
  }
  return curve;
}

PcaResult pca_project(const Eigen::MatrixXd& X, int components) {
  if (components < 1) throw std::invalid_argument("pca needs at least one component");
  if (components > X.cols()) throw std::invalid_argument("pca: more components than features");
  if (X.rows() <= components) throw std::invalid_argument("pca: need more rows than components");
  PcaResult out;
  out.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - out.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(X.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");

  const Eigen::Index p = X.cols();
  const auto c = static_cast<Eigen::Index>(components);
  out.components.resize(p, c);
  out.explained_variance.resize(c);
  const double total = std::max(eig.eigenvalues().sum(), 0.0);
  for (Eigen::Index j = 0; j < c; ++j) {
    const Eigen::Index src = p - 1 - j;  // eigenvalues ascend
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.components.col(j) = v;
    out.explained_variance(j) = std::max(eig.eigenvalues()(src), 0.0);
  }
  out.explained_ratio = total > 0.0 ? Eigen::VectorXd(out.explained_variance / total)
                                    : Eigen::VectorXd::Zero(c).eval();
  out.scores = centered * out.components;
  return out;
}

}  // namespace pmtemp
