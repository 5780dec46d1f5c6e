#include "pmtemp/features.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace pmtemp {

const std::array<std::string_view, kBaseSignalCount>& base_signal_names() {
  static constexpr std::array<std::string_view, kBaseSignalCount> names = {
      "ambient", "coolant", "u_d", "u_q",  "motor_speed", "i_d",
      "i_q",     "u_s",     "i_s", "s_el", "i_s_omega",   "s_el_omega"};
  return names;
}

double angular_speed(double motor_speed_rpm) { return 2.0 * std::numbers::pi * motor_speed_rpm / 60.0; }

SignalRecord derive_inputs(const RawSample& s) {
  const double u_s = std::hypot(s.u_d, s.u_q);
  const double i_s = std::hypot(s.i_d, s.i_q);
  const double s_el = 1.5 * u_s * i_s;
  const double omega = angular_speed(s.motor_speed);
  return {s.ambient, s.coolant, s.u_d, s.u_q, s.motor_speed, s.i_d, s.i_q,
          u_s,       i_s,       s_el,  i_s * omega,          s_el * omega};
}

EwMoments ew_update(EwStreamState& state, double x, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  const double decay = 1.0 - alpha;
  const double prev_sum = state.weight_sum;
  const double prev_mean = state.mean;
  const double sum = decay * prev_sum + 1.0;
  const double mean = prev_mean + (x - prev_mean) / sum;
  const double shift = mean - prev_mean;
  const double dev = x - mean;
  state.second_moment = decay * (state.second_moment + prev_sum * shift * shift) + dev * dev;
  state.weight_sum = sum;
  state.mean = mean;
  return {mean, std::max(0.0, state.second_moment / sum)};
}

double ewma_update(EwStreamState& state, double x, double alpha) { return ew_update(state, x, alpha).mean; }

double ewms_update(EwStreamState& state, double x, double alpha) {
  return ew_update(state, x, alpha).variance;
}

double ewma_recursive(double previous, double x, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  return (1.0 - alpha) * previous + alpha * x;
}

double alpha_from_span(double span) {
  if (!(span >= 1.0)) throw std::invalid_argument("span must be >= 1");
  return 2.0 / (span + 1.0);
}

double alpha_from_rc(double rc_seconds, double step_seconds) {
  if (!(step_seconds > 0.0)) throw std::invalid_argument("step size must be positive");
  if (!(rc_seconds >= 0.0)) throw std::invalid_argument("RC must be nonnegative");
  return step_seconds / (rc_seconds + step_seconds);
}

SpanSet::SpanSet(std::vector<int> spans) : spans_(std::move(spans)) {
  if (spans_.empty()) throw std::invalid_argument("span set must not be empty");
  for (std::size_t i = 0; i < spans_.size(); ++i) {
    if (spans_[i] < 1) throw std::invalid_argument("spans must be >= 1");
    if (i > 0 && spans_[i] <= spans_[i - 1]) throw std::invalid_argument("spans must be strictly increasing");
  }
}

SpanSet SpanSet::from_seconds(const std::vector<double>& seconds, double sample_rate_hz) {
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sample rate must be positive");
  std::vector<int> spans;
  for (double s : seconds) {
    spans.push_back(std::max(1, static_cast<int>(std::lround(s * sample_rate_hz))));
  }
  return SpanSet(std::move(spans));
}

std::vector<std::string> feature_names(const SpanSet& spans) {
  std::vector<std::string> names;
  names.reserve(kBaseSignalCount * (1 + 2 * spans.size()));
  for (auto n : base_signal_names()) names.emplace_back(n);
  for (const char* kind : {"ewma", "ewms"}) {
    for (int span : spans.values()) {
      for (auto n : base_signal_names()) {
        names.push_back(std::string(kind) + "_s" + std::to_string(span) + "_" + std::string(n));
      }
    }
  }
  return names;
}

FeatureMatrix build_features(const Dataset& dataset, const SpanSet& spans) {
  if (dataset.empty()) throw std::invalid_argument("cannot build features of an empty dataset");
  if (spans.size() == 0) throw std::invalid_argument("span set must not be empty");
  const auto n = static_cast<Eigen::Index>(dataset.size());
  const auto k = static_cast<Eigen::Index>(spans.size());
  const auto base = static_cast<Eigen::Index>(kBaseSignalCount);

  FeatureMatrix fm;
  fm.names = feature_names(spans);
  fm.spans = spans;
  fm.profiles = dataset.profiles();
  fm.X.resize(n, base * (1 + 2 * k));
  fm.y.resize(n);

  const auto& samples = dataset.samples();
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto rec = derive_inputs(samples[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < base; ++c) fm.X(r, c) = rec[static_cast<std::size_t>(c)];
    fm.y(r) = samples[static_cast<std::size_t>(r)].pm;
  }

  // Column-wise filtering; state restarts at each profile.
  for (Eigen::Index si = 0; si < k; ++si) {
    const double alpha = alpha_from_span(spans.values()[static_cast<std::size_t>(si)]);
    for (Eigen::Index c = 0; c < base; ++c) {
      const Eigen::Index mean_col = base + si * base + c;
      const Eigen::Index var_col = base + (k + si) * base + c;
      for (const auto& p : dataset.profiles()) {
        EwStreamState state;
        for (auto r = static_cast<Eigen::Index>(p.begin); r < static_cast<Eigen::Index>(p.end); ++r) {
          const auto m = ew_update(state, fm.X(r, c), alpha);
          fm.X(r, mean_col) = m.mean;
          fm.X(r, var_col) = m.variance;
        }
      }
    }
  }
  return fm;
}

FeatureMatrix select_profiles(const FeatureMatrix& features, const std::set<std::string>& ids) {
  for (const auto& id : ids) {
    bool found = false;
    for (const auto& p : features.profiles) found = found || p.id == id;
    if (!found) throw std::invalid_argument("unknown profile id: " + id);
  }
  Eigen::Index rows = 0;
  for (const auto& p : features.profiles) {
    if (ids.contains(p.id)) rows += static_cast<Eigen::Index>(p.size());
  }
  FeatureMatrix out;
  out.names = features.names;
  out.spans = features.spans;
  out.scaler_id = features.scaler_id;
  out.X.resize(rows, features.cols());
  out.y.resize(rows);
  Eigen::Index at = 0;
  for (const auto& p : features.profiles) {
    if (!ids.contains(p.id)) continue;
    const auto len = static_cast<Eigen::Index>(p.size());
    out.X.middleRows(at, len) = features.X.middleRows(static_cast<Eigen::Index>(p.begin), len);
    out.y.segment(at, len) = features.y.segment(static_cast<Eigen::Index>(p.begin), len);
    out.profiles.push_back({p.id, static_cast<std::size_t>(at), static_cast<std::size_t>(at + len)});
    at += len;
  }
  return out;
}

void write_feature_csv(const FeatureMatrix& features, std::ostream& out) {
  out << std::setprecision(17) << "profile_id";
  for (const auto& n : features.names) out << ',' << n;
  out << ",pm\n";
  for (const auto& p : features.profiles) {
    for (auto r = static_cast<Eigen::Index>(p.begin); r < static_cast<Eigen::Index>(p.end); ++r) {
      out << p.id;
      for (Eigen::Index c = 0; c < features.cols(); ++c) out << ',' << features.X(r, c);
      out << ',' << features.y(r) << '\n';
    }
  }
}

FeatureStream::FeatureStream(SpanSet spans) : spans_(std::move(spans)) {
  if (spans_.size() == 0) throw std::invalid_argument("span set must not be empty");
  for (int s : spans_.values()) alphas_.push_back(alpha_from_span(s));
  states_.resize(spans_.size() * kBaseSignalCount);
  row_.resize(static_cast<Eigen::Index>(kBaseSignalCount * (1 + 2 * spans_.size())));
}

const Eigen::VectorXd& FeatureStream::push(const RawSample& sample) {
  const auto rec = derive_inputs(sample);
  const auto base = static_cast<Eigen::Index>(kBaseSignalCount);
  const auto k = static_cast<Eigen::Index>(spans_.size());
  for (Eigen::Index c = 0; c < base; ++c) row_(c) = rec[static_cast<std::size_t>(c)];
  for (Eigen::Index si = 0; si < k; ++si) {
    for (Eigen::Index c = 0; c < base; ++c) {
      auto& state = states_[static_cast<std::size_t>(si * base + c)];
      const auto m = ew_update(state, row_(c), alphas_[static_cast<std::size_t>(si)]);
      row_(base + si * base + c) = m.mean;
      row_(base + (k + si) * base + c) = m.variance;
    }
  }
  ++seen_;
  return row_;
}

void FeatureStream::reset() {
  for (auto& s : states_) s = EwStreamState{};
  seen_ = 0;
}

std::size_t FeatureStream::state_bytes() const {
  return states_.capacity() * sizeof(EwStreamState) + alphas_.capacity() * sizeof(double) +
         static_cast<std::size_t>(row_.size()) * sizeof(double);
}

namespace {

std::string hash_hex(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &v(i), sizeof bits);
      for (int byte = 0; byte < 8; ++byte) {
        h ^= (bits >> (8 * byte)) & 0xFF;
        h *= 0x100000001b3ULL;
      }
    }
  };
  feed(a);
  feed(b);
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace

Scaler fit_scaler(const FeatureMatrix& train) {
  if (train.rows() == 0) throw std::invalid_argument("cannot fit a scaler on zero rows");
  const double n = static_cast<double>(train.rows());
  Scaler scaler;
  std::vector<double> means, stds;
  for (Eigen::Index c = 0; c < train.cols(); ++c) {
    const auto col = train.X.col(c);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    const auto& name = train.names[static_cast<std::size_t>(c)];
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      scaler.dropped.push_back(name);
      continue;
    }
    scaler.names.push_back(name);
    scaler.source_index.push_back(static_cast<std::size_t>(c));
    means.push_back(mean);
    stds.push_back(sd);
  }
  scaler.mean = Eigen::Map<Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
  scaler.stddev = Eigen::Map<Eigen::VectorXd>(stds.data(), static_cast<Eigen::Index>(stds.size()));
  scaler.id = hash_hex(scaler.mean, scaler.stddev);
  return scaler;
}

FeatureMatrix apply_scaler(const Scaler& scaler, const FeatureMatrix& features) {
  std::unordered_map<std::string, Eigen::Index> lookup;
  for (std::size_t c = 0; c < features.names.size(); ++c) lookup.emplace(features.names[c], static_cast<Eigen::Index>(c));
  FeatureMatrix out;
  out.names = scaler.names;
  out.spans = features.spans;
  out.scaler_id = scaler.id;
  out.profiles = features.profiles;
  out.y = features.y;
  out.X.resize(features.rows(), static_cast<Eigen::Index>(scaler.names.size()));
  for (std::size_t j = 0; j < scaler.names.size(); ++j) {
    const auto it = lookup.find(scaler.names[j]);
    if (it == lookup.end()) throw std::invalid_argument("feature missing for scaler: " + scaler.names[j]);
    const auto jj = static_cast<Eigen::Index>(j);
    out.X.col(jj) = (features.X.col(it->second).array() - scaler.mean(jj)) / scaler.stddev(jj);
  }
  return out;
}

Eigen::VectorXd apply_scaler_row(const Scaler& scaler, const Eigen::VectorXd& row) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(scaler.names.size()));
  for (std::size_t j = 0; j < scaler.source_index.size(); ++j) {
    const auto src = static_cast<Eigen::Index>(scaler.source_index[j]);
    if (src >= row.size()) throw std::invalid_argument("feature row is narrower than the scaler expects");
    const auto jj = static_cast<Eigen::Index>(j);
    out(jj) = (row(src) - scaler.mean(jj)) / scaler.stddev(jj);
  }
  return out;
}

}  // namespace pmtemp
