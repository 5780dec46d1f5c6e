#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmtemp {

/// A required column is absent from a CSV header.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& column)
      : std::runtime_error("missing required column: " + column), column_(column) {}
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

/// A cell could not be parsed. `row` is the 0-based data row (header excluded).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : std::runtime_error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

/// One drive-telemetry observation. Temperatures in degC, voltages in V,
/// currents in A, motor speed in 1/min.
struct RawSample {
  double ambient = 0.0;
  double coolant = 0.0;
  double u_d = 0.0;
  double u_q = 0.0;
  double i_d = 0.0;
  double i_q = 0.0;
  double motor_speed = 0.0;
  double pm = 0.0;
  std::string profile_id;
  /// Values of the dataset's extra (non-model) columns, aligned with
  /// Dataset::extra_columns.
  std::vector<double> extras;
};

/// Half-open row range [begin, end) belonging to one measurement session.
struct ProfileSpan {
  std::string id;
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Samples grouped into contiguous, time-ordered profiles.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(double sample_rate_hz);

  double sample_rate_hz() const { return sample_rate_hz_; }
  const std::vector<RawSample>& samples() const { return samples_; }
  const std::vector<std::string>& extra_columns() const { return extra_columns_; }
  const std::vector<ProfileSpan>& profiles() const { return profiles_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }

  std::vector<std::string> profile_ids() const;
  bool has_profile(const std::string& id) const;
  const ProfileSpan& profile(const std::string& id) const;
  double hours() const;

  void set_extra_columns(std::vector<std::string> names);
  /// Appends a sample. A sample whose profile_id differs from the previous one
  /// starts a new profile; reopening an earlier profile is rejected.
  void append(RawSample sample);
  /// Returns a dataset holding only the given profiles, in this dataset's order.
  Dataset subset(const std::set<std::string>& ids) const;
  /// Concatenates another dataset's profiles; ids must not collide.
  void append_dataset(const Dataset& other);

 private:
  double sample_rate_hz_ = 2.0;
  std::vector<RawSample> samples_;
  std::vector<std::string> extra_columns_;
  std::vector<ProfileSpan> profiles_;
};

/// Column names the loader requires.
const std::vector<std::string>& required_columns();

/// Reads a comma-separated dataset. Rows are grouped by profile_id in order of
/// first appearance, preserving file order within each profile.
Dataset load_dataset(const std::filesystem::path& path, double sample_rate_hz = 2.0);
Dataset load_dataset_from_string(const std::string& csv, double sample_rate_hz = 2.0);

/// Writes the dataset with all numeric values at round-trip precision.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
std::string dataset_to_csv(const Dataset& dataset);

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

/// Whole-profile split. Throws std::invalid_argument on unknown ids.
DatasetSplit split_profiles(const Dataset& dataset, const std::set<std::string>& test_profile_ids);

}  // namespace pmtemp
