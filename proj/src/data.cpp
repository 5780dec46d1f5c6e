#include "pmtemp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace pmtemp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return cells;
}

double parse_number(std::string_view cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
    throw ParseError(row, "non-numeric value '" + std::string(cell) + "' in column " + column);
  }
  if (!std::isfinite(value)) {
    throw ParseError(row, "non-finite value in column " + column);
  }
  return value;
}

Dataset parse_csv(std::istream& in, double sample_rate_hz) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(required_columns().front());
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = split_line(line);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < header.size(); ++c) index.emplace(std::string(header[c]), c);

  std::vector<std::size_t> required;
  for (const auto& name : required_columns()) {
    const auto it = index.find(name);
    if (it == index.end()) throw SchemaError(name);
    required.push_back(it->second);
  }
  std::vector<std::string> extra_names;
  std::vector<std::size_t> extra_index;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(header[c]);
    if (std::find(required_columns().begin(), required_columns().end(), name) ==
        required_columns().end()) {
      extra_names.push_back(name);
      extra_index.push_back(c);
    }
  }

  // Group rows by profile in order of first appearance.
  std::vector<std::string> order;
  std::map<std::string, std::vector<RawSample>> groups;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(row, "expected " + std::to_string(header.size()) + " cells, got " +
                                std::to_string(cells.size()));
    }
    const auto& names = required_columns();
    RawSample s;
    s.ambient = parse_number(cells[required[0]], row, names[0]);
    s.coolant = parse_number(cells[required[1]], row, names[1]);
    s.u_d = parse_number(cells[required[2]], row, names[2]);
    s.u_q = parse_number(cells[required[3]], row, names[3]);
    s.motor_speed = parse_number(cells[required[4]], row, names[4]);
    s.i_d = parse_number(cells[required[5]], row, names[5]);
    s.i_q = parse_number(cells[required[6]], row, names[6]);
    s.pm = parse_number(cells[required[7]], row, names[7]);
    s.profile_id = std::string(cells[required[8]]);
    if (s.profile_id.empty()) throw ParseError(row, "empty profile_id");
    s.extras.reserve(extra_index.size());
    for (std::size_t e = 0; e < extra_index.size(); ++e) {
      s.extras.push_back(parse_number(cells[extra_index[e]], row, extra_names[e]));
    }
    auto [it, inserted] = groups.try_emplace(s.profile_id);
    if (inserted) order.push_back(s.profile_id);
    it->second.push_back(std::move(s));
    ++row;
  }

  Dataset dataset(sample_rate_hz);
  dataset.set_extra_columns(extra_names);
  for (const auto& id : order) {
    for (auto& s : groups[id]) dataset.append(std::move(s));
  }
  return dataset;
}

}  // namespace

const std::vector<std::string>& required_columns() {
  static const std::vector<std::string> names = {"ambient", "coolant", "u_d", "u_q", "motor_speed",
                                                 "i_d",     "i_q",     "pm",  "profile_id"};
  return names;
}

Dataset::Dataset(double sample_rate_hz) : sample_rate_hz_(sample_rate_hz) {
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sample_rate_hz must be positive");
}

std::vector<std::string> Dataset::profile_ids() const {
  std::vector<std::string> ids;
  ids.reserve(profiles_.size());
  for (const auto& p : profiles_) ids.push_back(p.id);
  return ids;
}

bool Dataset::has_profile(const std::string& id) const {
  return std::any_of(profiles_.begin(), profiles_.end(), [&](const auto& p) { return p.id == id; });
}

const ProfileSpan& Dataset::profile(const std::string& id) const {
  for (const auto& p : profiles_) {
    if (p.id == id) return p;
  }
  throw std::invalid_argument("unknown profile id: " + id);
}

double Dataset::hours() const { return static_cast<double>(samples_.size()) / sample_rate_hz_ / 3600.0; }

void Dataset::set_extra_columns(std::vector<std::string> names) {
  if (!samples_.empty()) throw std::logic_error("extra columns must be set before samples");
  extra_columns_ = std::move(names);
}

void Dataset::append(RawSample sample) {
  if (sample.profile_id.empty()) throw std::invalid_argument("profile_id must be non-empty");
  if (sample.extras.size() != extra_columns_.size()) {
    throw std::invalid_argument("sample extras do not match dataset extra columns");
  }
  if (profiles_.empty() || profiles_.back().id != sample.profile_id) {
    if (has_profile(sample.profile_id)) {
      throw std::invalid_argument("profile " + sample.profile_id + " is not contiguous");
    }
    profiles_.push_back({sample.profile_id, samples_.size(), samples_.size()});
  }
  samples_.push_back(std::move(sample));
  profiles_.back().end = samples_.size();
}

Dataset Dataset::subset(const std::set<std::string>& ids) const {
  Dataset out(sample_rate_hz_);
  out.extra_columns_ = extra_columns_;
  for (const auto& p : profiles_) {
    if (!ids.contains(p.id)) continue;
    for (std::size_t i = p.begin; i < p.end; ++i) out.append(samples_[i]);
  }
  return out;
}

void Dataset::append_dataset(const Dataset& other) {
  if (other.extra_columns_ != extra_columns_) {
    throw std::invalid_argument("datasets have different extra columns");
  }
  for (const auto& s : other.samples_) append(s);
}

Dataset load_dataset(const std::filesystem::path& path, double sample_rate_hz) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
  return parse_csv(in, sample_rate_hz);
}

Dataset load_dataset_from_string(const std::string& csv, double sample_rate_hz) {
  std::istringstream in(csv);
  return parse_csv(in, sample_rate_hz);
}

std::string dataset_to_csv(const Dataset& dataset) {
  std::ostringstream out;
  out.precision(17);
  auto header = required_columns();
  header.insert(header.end(), dataset.extra_columns().begin(), dataset.extra_columns().end());
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (const auto& s : dataset.samples()) {
    out << s.ambient << ',' << s.coolant << ',' << s.u_d << ',' << s.u_q << ',' << s.motor_speed << ','
        << s.i_d << ',' << s.i_q << ',' << s.pm << ',' << s.profile_id;
    for (double e : s.extras) out << ',' << e;
    out << '\n';
  }
  return out.str();
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path.string());
  out << dataset_to_csv(dataset);
}

DatasetSplit split_profiles(const Dataset& dataset, const std::set<std::string>& test_profile_ids) {
  for (const auto& id : test_profile_ids) {
    if (!dataset.has_profile(id)) throw std::invalid_argument("unknown test profile id: " + id);
  }
  std::set<std::string> train_ids;
  for (const auto& p : dataset.profiles()) {
    if (!test_profile_ids.contains(p.id)) train_ids.insert(p.id);
  }
  return {dataset.subset(train_ids), dataset.subset(test_profile_ids)};
}

}  // namespace pmtemp
