#include <gtest/gtest.h>

#include <filesystem>

#include "pmtemp/data.hpp"
#include "pmtemp/thermal_network.hpp"

using namespace pmtemp;

namespace {

const char* kHeader = "u_q,coolant,u_d,motor_speed,i_d,i_q,pm,ambient,torque,profile_id\n";

std::string row(double v, const std::string& id) {
  const std::string s = std::to_string(v);
  return s + "," + s + "," + s + "," + s + "," + s + "," + s + "," + s + "," + s + "," + s + "," + id + "\n";
}

}  // namespace

TEST(Dataset, LoadsColumnsInAnyOrderAndKeepsExtras) {
  const auto ds = load_dataset_from_string(std::string(kHeader) + row(1, "4") + row(2, "4") + row(3, "7"));
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.extra_columns(), std::vector<std::string>{"torque"});
  EXPECT_DOUBLE_EQ(ds.samples()[1].u_q, 2.0);
  EXPECT_DOUBLE_EQ(ds.samples()[2].extras.at(0), 3.0);
  EXPECT_EQ(ds.profile_ids(), (std::vector<std::string>{"4", "7"}));
  EXPECT_EQ(ds.profile("4").size(), 2u);
}

TEST(Dataset, GroupsInterleavedRowsByFirstAppearance) {
  const auto ds = load_dataset_from_string(std::string(kHeader) + row(1, "a") + row(2, "b") + row(3, "a"));
  EXPECT_EQ(ds.profile_ids(), (std::vector<std::string>{"a", "b"}));
  EXPECT_DOUBLE_EQ(ds.samples()[1].pm, 3.0);
  EXPECT_EQ(ds.profile("a").begin, 0u);
  EXPECT_EQ(ds.profile("a").end, 2u);
}

TEST(Dataset, MissingColumnRaisesSchemaError) {
  try {
    load_dataset_from_string("u_q,coolant,u_d,motor_speed,i_d,i_q,ambient,profile_id\n1,1,1,1,1,1,1,a\n");
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.column(), "pm");
  }
}

TEST(Dataset, BadCellReportsRow) {
  std::string csv = std::string(kHeader) + row(1, "a") + "x,1,1,1,1,1,1,1,1,a\n";
  try {
    load_dataset_from_string(csv);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 1u);
  }
  EXPECT_THROW(load_dataset_from_string(std::string(kHeader) + "1,1,1\n"), ParseError);
  EXPECT_THROW(load_dataset_from_string(std::string(kHeader) + "nan,1,1,1,1,1,1,1,1,a\n"), ParseError);
}

TEST(Dataset, AppendRejectsReopenedProfile) {
  Dataset ds;
  RawSample s;
  s.profile_id = "a";
  ds.append(s);
  s.profile_id = "b";
  ds.append(s);
  s.profile_id = "a";
  EXPECT_THROW(ds.append(s), std::invalid_argument);
  s.profile_id = "";
  EXPECT_THROW(ds.append(s), std::invalid_argument);
}

TEST(Dataset, HoursFollowSampleRate) {
  Dataset ds(2.0);
  RawSample s;
  s.profile_id = "a";
  for (int i = 0; i < 7200; ++i) ds.append(s);
  EXPECT_DOUBLE_EQ(ds.hours(), 1.0);
}

TEST(Dataset, CsvRoundTripIsExact) {
  SyntheticConfig cfg;
  cfg.duration_s = 120;
  cfg.profiles = 2;
  const auto ds = generate_synthetic(cfg, 3);
  const auto back = load_dataset_from_string(dataset_to_csv(ds));
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_EQ(back.extra_columns(), ds.extra_columns());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.samples()[i].pm, ds.samples()[i].pm);
    EXPECT_EQ(back.samples()[i].u_d, ds.samples()[i].u_d);
    EXPECT_EQ(back.samples()[i].extras, ds.samples()[i].extras);
    EXPECT_EQ(back.samples()[i].profile_id, ds.samples()[i].profile_id);
  }
}

TEST(Dataset, FileRoundTrip) {
  SyntheticConfig cfg;
  cfg.duration_s = 60;
  const auto ds = generate_synthetic(cfg, 1);
  const auto path = std::filesystem::temp_directory_path() / "pmtemp_data_roundtrip.csv";
  save_dataset(ds, path);
  EXPECT_EQ(load_dataset(path).size(), ds.size());
  std::filesystem::remove(path);
  EXPECT_THROW(load_dataset(path), std::runtime_error);
}

TEST(Split, PartitionsProfiles) {
  SyntheticConfig cfg;
  cfg.duration_s = 60;
  cfg.profiles = 4;
  const auto ds = generate_synthetic(cfg, 5);
  const auto ids = ds.profile_ids();
  const auto split = split_profiles(ds, {ids[1], ids[3]});
  EXPECT_EQ(split.train.profile_ids(), (std::vector<std::string>{ids[0], ids[2]}));
  EXPECT_EQ(split.test.profile_ids(), (std::vector<std::string>{ids[1], ids[3]}));
  EXPECT_EQ(split.train.size() + split.test.size(), ds.size());
  EXPECT_THROW(split_profiles(ds, {"nope"}), std::invalid_argument);
}
