#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pmtemp/data.hpp"

namespace pmtemp {

/// Raw inputs plus derived electrical quantities, in this order:
/// ambient, coolant, u_d, u_q, motor_speed, i_d, i_q, u_s, i_s, s_el,
/// i_s_omega, s_el_omega.
inline constexpr std::size_t kBaseSignalCount = 12;
using SignalRecord = std::array<double, kBaseSignalCount>;

const std::array<std::string_view, kBaseSignalCount>& base_signal_names();

/// Mechanical angular speed in rad/s from a speed in 1/min.
double angular_speed(double motor_speed_rpm);

/// Appends u_s, i_s, S_el = 1.5 u_s i_s, i_s*omega and S_el*omega.
SignalRecord derive_inputs(const RawSample& sample);

// ---------------------------------------------------------------------------
// Exponentially weighted moments

/// Recursive state of one exponentially weighted filter. The weight sum is
/// tracked explicitly so the outputs equal the normalized finite sums
///   mean_t = sum_i w_i x_{t-i} / sum_i w_i,
///   var_t  = sum_i w_i (x_{t-i} - mean_t)^2 / sum_i w_i,   w_i = (1-alpha)^i,
/// at every step, not only asymptotically.
struct EwStreamState {
  double mean = 0.0;
  double second_moment = 0.0;  // unnormalized sum_i w_i (x_{t-i} - mean_t)^2
  double weight_sum = 0.0;     // in (0, 1/alpha] once a sample was seen
};

struct EwMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Consumes one sample. Throws std::invalid_argument unless 0 < alpha <= 1.
EwMoments ew_update(EwStreamState& state, double x, double alpha);

/// Convenience wrappers; each call consumes one sample, so a state should be
/// driven by exactly one of them.
double ewma_update(EwStreamState& state, double x, double alpha);
double ewms_update(EwStreamState& state, double x, double alpha);

/// Plain first-order recursion (1 - alpha) * previous + alpha * x. Unlike
/// ew_update it is not normalized by the weight sum, so early outputs lean
/// towards the initial value.
double ewma_recursive(double previous, double x, double alpha);

/// alpha = 2 / (span + 1).
double alpha_from_span(double span);

/// Smoothing factor of a backward-discretized RC low-pass: h / (RC + h).
double alpha_from_rc(double rc_seconds, double step_seconds);

/// Strictly increasing filter spans, in samples.
class SpanSet {
 public:
  SpanSet() = default;
  explicit SpanSet(std::vector<int> spans);
  /// Converts spans given in seconds at the given sample rate, rounding to the
  /// nearest sample (at least 1).
  static SpanSet from_seconds(const std::vector<double>& seconds, double sample_rate_hz);

  const std::vector<int>& values() const { return spans_; }
  std::size_t size() const { return spans_.size(); }
  bool operator==(const SpanSet&) const = default;

 private:
  std::vector<int> spans_;
};

/// Feature names in column order: base signals, then EWMA of every signal for
/// each span, then EWMS of every signal for each span.
std::vector<std::string> feature_names(const SpanSet& spans);

struct FeatureMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> names;
  SpanSet spans;
  std::string scaler_id;
  std::vector<ProfileSpan> profiles;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index cols() const { return X.cols(); }
};

/// Batch features with filter state reset at every profile boundary.
FeatureMatrix build_features(const Dataset& dataset, const SpanSet& spans);

/// Rows of the given profiles, in matrix order. Unknown ids are rejected.
FeatureMatrix select_profiles(const FeatureMatrix& features, const std::set<std::string>& ids);

void write_feature_csv(const FeatureMatrix& features, std::ostream& out);

/// Constant-memory incremental feature computation for one stream.
class FeatureStream {
 public:
  explicit FeatureStream(SpanSet spans);

  /// Features of the next sample (same order as feature_names()).
  const Eigen::VectorXd& push(const RawSample& sample);
  void reset();

  const SpanSet& spans() const { return spans_; }
  std::size_t samples_seen() const { return seen_; }
  /// Bytes held by the filter state and output buffer.
  std::size_t state_bytes() const;

 private:
  SpanSet spans_;
  std::vector<double> alphas_;
  std::vector<EwStreamState> states_;  // [span][signal]
  Eigen::VectorXd row_;
  std::size_t seen_ = 0;
};

// ---------------------------------------------------------------------------
// Standardization

struct Scaler {
  std::vector<std::string> names;          // retained features
  std::vector<std::size_t> source_index;   // column of each retained feature in the input
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
  std::vector<std::string> dropped;        // zero-variance features
  std::string id;
};

/// Population statistics of every column; zero-variance columns are dropped
/// and recorded by name.
Scaler fit_scaler(const FeatureMatrix& train);

/// Keeps the scaler's features and standardizes them. Throws if a retained
/// feature name is missing from the input.
FeatureMatrix apply_scaler(const Scaler& scaler, const FeatureMatrix& features);

/// Standardizes one full-width feature row (as produced by FeatureStream).
Eigen::VectorXd apply_scaler_row(const Scaler& scaler, const Eigen::VectorXd& row);

}  // namespace pmtemp
