// Copyright 2026 The dpsynth Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "dpsynth/data.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "dpsynth/desk.h"
#include "dpsynth/errors.h"
#include "oracles/oracles.h"

namespace dpsynth::data {
namespace {

std::shared_ptr<const Schema> SmallSchema() {
  return std::make_shared<const Schema>(
      std::vector<Column>{Column::Categorical("color", {"red", "green", "blue"}),
                          Column::Numerical("age", 0.0, 100.0),
                          Column::Categorical("sex", {"F", "M"}),
                          Column::Categorical("label", {"no", "yes"})},
      "label", std::vector<std::string>{"sex"}, 10);
}

TEST(SchemaTest, RejectsBrokenSchemas) {
  using V = std::vector<Column>;
  EXPECT_THROW(Schema(V{}, "x", {}), InvalidArgumentError);
  EXPECT_THROW(Schema(V{Column::Categorical("a", {"x"})}, "b", {}),
               InvalidArgumentError);
  EXPECT_THROW(Schema(V{Column::Categorical("a", {"x", "x"})}, "a", {}),
               InvalidArgumentError);
  EXPECT_THROW(Schema(V{Column::Categorical("a", {"x"}),
                        Column::Categorical("a", {"y"})},
                      "a", {}),
               InvalidArgumentError);
  EXPECT_THROW(Schema(V{Column::Numerical("a", 1.0, 1.0)}, "a", {}),
               InvalidArgumentError);
  EXPECT_THROW(Schema(V{Column::Categorical("a", {"x"})}, "a", {"zz"}),
               InvalidArgumentError);
  EXPECT_THROW(Schema(V{Column::Categorical("a", {"x"})}, "a", {}, 1),
               InvalidArgumentError);
}

TEST(SchemaTest, JsonRoundTripAndLookups) {
  const auto schema = SmallSchema();
  const Schema back = Schema::FromJson(schema->ToJson());
  EXPECT_EQ(back, *schema);
  EXPECT_EQ(back.class_index(), 3);
  EXPECT_EQ(back.DomainSize(0), 3);
  EXPECT_EQ(back.DomainSize(1), 10);
  EXPECT_EQ(back.CodeOf(0, "blue"), 2);
  EXPECT_EQ(back.CodeOf(0, "purple"), -1);
  EXPECT_EQ(back.CodeOf(1, back.Label(1, 4)), 4);
  EXPECT_THROW(back.IndexOf("missing"), InvalidArgumentError);
  EXPECT_THROW(Schema::FromJson("{not json"), InvalidArgumentError);
}

TEST(CsvTest, ParsesAndDiscretizes) {
  std::istringstream in(
      "color,age,sex,label\n"
      "red, 5,F,no\n"
      "blue,99.5,M,yes\n"
      "green,-3,M,no\n"
      "green,150,F,yes\n");
  const TabularDataset d = ParseCsv(in, SmallSchema(), Provenance::kTrain);
  ASSERT_EQ(d.rows(), 4u);
  EXPECT_EQ(d.provenance(), Provenance::kTrain);
  EXPECT_EQ(d.at(0, 0), 0);
  EXPECT_EQ(d.at(0, 1), 0);
  EXPECT_EQ(d.at(1, 1), 9);
  EXPECT_EQ(d.at(2, 1), 0);  // clamped below
  EXPECT_EQ(d.at(3, 1), 9);  // clamped above
  EXPECT_EQ(d.at(1, 3), 1);
}

TEST(CsvTest, ErrorsNameRowAndColumn) {
  const auto expect_error = [](const std::string& text, const std::string& part) {
    std::istringstream in(text);
    try {
      ParseCsv(in, SmallSchema());
      FAIL() << "expected DataError";
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find(part), std::string::npos) << e.what();
    }
  };
  expect_error("color,age,sex,label\nred,1,F,no\nmauve,1,F,no\n", "row 2");
  expect_error("color,age,sex,label\nred,abc,F,no\n", "age");
  expect_error("color,age,sex,label\nred,,F,no\n", "age");
  expect_error("color,age,sex,label\nred,1,F\n", "row 1");
  expect_error("color,age,sex\nred,1,F\n", "label");
}

TEST(CsvTest, WriteThenReadIsIdentity) {
  const TabularDataset d = desk::Generate(5, 300, 60);
  std::stringstream buf;
  WriteCsv(d, buf);
  const TabularDataset back = ParseCsv(buf, d.schema_ptr());
  EXPECT_EQ(back, d);
}

TEST(BinningTest, EdgesAndMidpoints) {
  EXPECT_EQ(BinIndex(0.0, 0.0, 10.0, 5), 0);
  EXPECT_EQ(BinIndex(1.99, 0.0, 10.0, 5), 0);
  EXPECT_EQ(BinIndex(2.0, 0.0, 10.0, 5), 1);
  EXPECT_EQ(BinIndex(10.0, 0.0, 10.0, 5), 4);
  EXPECT_DOUBLE_EQ(BinMidpoint(0, 0.0, 10.0, 5), 1.0);
  EXPECT_DOUBLE_EQ(BinMidpoint(4, 0.0, 10.0, 5), 9.0);
  EXPECT_THROW(BinIndex(1.0, 0.0, 1.0, 1), InvalidArgumentError);
}

TEST(SplitTest, DisjointAndSized) {
  const TabularDataset d = desk::Generate(3, 999, 200);
  Rng rng(1);
  const auto [train, test] = SplitTrainTest(d, 1.0 / 3.0, rng);
  EXPECT_EQ(test.rows(), 333u);
  EXPECT_EQ(train.rows() + test.rows(), d.rows());
  EXPECT_EQ(train.provenance(), Provenance::kTrain);
  EXPECT_EQ(test.provenance(), Provenance::kTest);
  Rng again(1);
  EXPECT_EQ(SplitTrainTest(d, 1.0 / 3.0, again).first, train);
}

TEST(ResampleTest, BalanceKeepsClassParityPerSubgroup) {
  const TabularDataset d = desk::Generate(4);
  Rng rng(2);
  const TabularDataset b = BalanceClassWithinSubgroup(d, "sex", rng);
  const int sex = b.schema().IndexOf("sex");
  const int cls = b.schema().class_index();
  std::vector<std::vector<int>> flat;
  for (std::size_t r = 0; r < b.rows(); ++r) flat.push_back({b.at(r, sex), b.at(r, cls)});
  const auto tab = oracle::CrossTab(flat, {0, 1});
  for (int g = 0; g < 2; ++g) {
    EXPECT_EQ(tab.at({g, 0}), tab.at({g, 1})) << g;
  }
}

TEST(ResampleTest, ImbalanceHitsRatioAndKeepsParity) {
  const TabularDataset d = desk::Generate(4);
  for (double ratio : {0.05, 0.1, 0.25, 0.5}) {
    Rng rng(3);
    const TabularDataset b = BalanceClassWithinSubgroup(d, "sex", rng);
    const TabularDataset im = ImbalanceSubgroup(b, "sex", ratio, rng);
    const auto dist = ColumnDistribution(im, im.schema().IndexOf("sex"));
    const double minority = *std::min_element(dist.begin(), dist.end());
    EXPECT_NEAR(minority, ratio, 1.0 / im.rows() + 1e-12) << ratio;
    std::vector<std::vector<int>> flat;
    const int sex = im.schema().IndexOf("sex");
    const int cls = im.schema().class_index();
    for (std::size_t r = 0; r < im.rows(); ++r) flat.push_back({im.at(r, sex), im.at(r, cls)});
    const auto tab = oracle::CrossTab(flat, {0, 1});
    for (int g = 0; g < 2; ++g) {
      const long diff = static_cast<long>(tab.at({g, 0})) - static_cast<long>(tab.at({g, 1}));
      EXPECT_LE(std::abs(diff), 1) << ratio;
    }
  }
}

TEST(ResampleTest, ImbalanceRejectsBadInput) {
  const TabularDataset d = desk::Generate(4);
  Rng rng(3);
  EXPECT_THROW(ImbalanceSubgroup(d, "sex", 0.0, rng), InvalidArgumentError);
  EXPECT_THROW(ImbalanceSubgroup(d, "sex", 0.6, rng), InvalidArgumentError);
  EXPECT_THROW(ImbalanceSubgroup(d, "race", 0.1, rng), DataError);
  EXPECT_THROW(ImbalanceSubgroup(d, "sex", 1e-5, rng), DataError);
}

TEST(SubgroupTest, ExtractMatchesCrossTab) {
  const TabularDataset d = desk::Generate(8);
  const std::vector<std::string> attrs = {"sex", "race"};
  const auto groups = ExtractSubgroups(d, attrs, 25);
  std::vector<std::vector<int>> flat;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    flat.push_back({d.at(r, d.schema().IndexOf("sex")),
                    d.at(r, d.schema().IndexOf("race"))});
  }
  const auto tab = oracle::CrossTab(flat, {0, 1});
  std::size_t expected = 0;
  for (const auto& [key, count] : tab) expected += count >= 25;
  ASSERT_EQ(groups.size(), expected);
  for (const Subgroup& g : groups) {
    const int s = d.schema().CodeOf(d.schema().IndexOf("sex"), g.key.values[0]);
    const int r = d.schema().CodeOf(d.schema().IndexOf("race"), g.key.values[1]);
    EXPECT_EQ(g.rows.size(), tab.at({s, r}));
  }
  EXPECT_EQ(groups[0].key.ToString().find("sex="), 0u);
  const std::vector<std::string> twice = {"sex", "sex"};
  EXPECT_THROW(ExtractSubgroups(d, twice), InvalidArgumentError);
}

TEST(DistributionTest, ClassDistributionSumsToOne) {
  const TabularDataset d = desk::Generate();
  const auto dist = ClassDistribution(d);
  EXPECT_NEAR(std::accumulate(dist.begin(), dist.end(), 0.0), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(dist[1], 0.2);
}

TEST(DeskTest, ShapeAndDeterminism) {
  const TabularDataset d = desk::Generate();
  EXPECT_EQ(d.rows(), desk::kRows);
  EXPECT_EQ(d.cols(), 6u);
  EXPECT_EQ(d, desk::Generate());
  EXPECT_FALSE(d == desk::Generate(desk::kDefaultSeed + 1));
  EXPECT_EQ(d.schema().class_column(), "income");
}

// Runs only when DPSYNTH_ADULT_CSV points at a local copy of the Adult data.
TEST(AdultTest, LoadsWithBundledSchema) {
  const char* path = std::getenv("DPSYNTH_ADULT_CSV");
  if (path == nullptr) GTEST_SKIP() << "DPSYNTH_ADULT_CSV not set";
  const auto schema = std::make_shared<const Schema>(Schema::Load(
      std::filesystem::path(DPSYNTH_SOURCE_DIR) / "data/adult.schema.json"));
  const TabularDataset d = LoadCsv(path, schema);
  EXPECT_GT(d.rows(), 30000u);
  const auto dist = ClassDistribution(d);
  EXPECT_NEAR(dist[1], 0.24, 0.02);
}

}  // namespace
}  // namespace dpsynth::data
