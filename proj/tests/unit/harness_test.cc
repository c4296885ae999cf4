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
#include "dpsynth/harness.h"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "dpsynth/desk.h"
#include "dpsynth/errors.h"

namespace dpsynth::harness {
namespace {

namespace fs = std::filesystem;

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dpsynth_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig Quick() {
  ExperimentConfig c;
  c.model = ModelKind::kPrivBayes;
  c.epsilons = {1.0, std::numeric_limits<double>::infinity()};
  c.l = 2;
  c.k = 2;
  c.seed = 17;
  return c;
}

TEST(NamesTest, RoundTrip) {
  for (Setting s : {Setting::kClass, Setting::kSingleSubgroup, Setting::kMultiSubgroup}) {
    EXPECT_EQ(ParseSetting(SettingName(s)), s);
  }
  for (ModelKind m : {ModelKind::kPrivBayes, ModelKind::kDpWgan, ModelKind::kPateGan}) {
    EXPECT_EQ(ParseModel(ModelName(m)), m);
  }
  EXPECT_THROW(ParseSetting("both"), InvalidArgumentError);
  EXPECT_THROW(ParseModel("ctgan"), InvalidArgumentError);
}

TEST(ConfigTest, JsonRoundTrip) {
  ExperimentConfig c = Quick();
  c.setting = Setting::kMultiSubgroup;
  c.subgroup_attributes = {"sex", "race"};
  c.imbalances = {0.1, 0.25};
  c.pategan.vote_scale = 12.5;
  c.dpwgan.gumbel_temperature = 0.5;
  c.privbayes.utility_sensitivity = 0.01;
  c.data_path = "/abs/data.csv";
  const ExperimentConfig back = ExperimentConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
  EXPECT_TRUE(std::isinf(back.epsilons[1]));
  EXPECT_EQ(*back.pategan.vote_scale, 12.5);
  EXPECT_EQ(back.dpwgan.gumbel_temperature, 0.5);
}

TEST(ConfigTest, RelativePathsResolveAgainstBase) {
  const ExperimentConfig c = ExperimentConfig::FromJson(
      R"({"data": "d.csv", "schema": "/x/s.json", "epsilons": [0.1, "inf"]})",
      "/base");
  EXPECT_EQ(c.data_path, fs::path("/base/d.csv"));
  EXPECT_EQ(c.schema_path, fs::path("/x/s.json"));
  EXPECT_EQ(c.epsilons.size(), 2u);
}

TEST(ConfigTest, RejectsInvalidValues) {
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"l": 0})"), InvalidArgumentError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"epsilons": [0]})"), InvalidArgumentError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"epsilons": []})"), InvalidArgumentError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"delta": 1})"), InvalidArgumentError);
  EXPECT_THROW(ExperimentConfig::FromJson(
                   R"({"setting": "single-subgroup", "imbalances": [0.7]})"),
               InvalidArgumentError);
  EXPECT_THROW(ExperimentConfig::FromJson(R"({"l": "ten"})"), InvalidArgumentError);
  EXPECT_THROW(ExperimentConfig::FromJson("[1]"), InvalidArgumentError);
  EXPECT_THROW(ExperimentConfig::Load("/nonexistent/config.json"), IoError);
}

TEST(WorkersTest, EnvironmentOverride) {
  ::setenv(kWorkersEnv, "3", 1);
  EXPECT_EQ(WorkerCount(), 3);
  ::setenv(kWorkersEnv, "0", 1);
  EXPECT_THROW(WorkerCount(), InvalidArgumentError);
  ::setenv(kWorkersEnv, "two", 1);
  EXPECT_THROW(WorkerCount(), InvalidArgumentError);
  ::unsetenv(kWorkersEnv);
  EXPECT_GE(WorkerCount(), 1);
}

TEST(ParallelForTest, RunsEveryIndexOnceAndRethrowsLowestFailure) {
  std::vector<std::atomic<int>> hits(50);
  ParallelFor(50, 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  try {
    ParallelFor(20, 3, [](std::size_t i) {
      if (i == 7 || i == 13) throw DataError("task " + std::to_string(i));
    });
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "task 7");
  }
}

TEST(PrepareTest, ClassSettingHasOneCellWithClassGroups) {
  const data::TabularDataset d = desk::Generate();
  const auto cells = Prepare(Quick(), d, std::nullopt);
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_TRUE(std::isnan(cells[0].imbalance));
  EXPECT_EQ(cells[0].train.provenance(), data::Provenance::kTrain);
  EXPECT_EQ(cells[0].test.provenance(), data::Provenance::kTest);
  EXPECT_EQ(cells[0].train.rows() + cells[0].test.rows(), d.rows());
  ASSERT_EQ(cells[0].groups.size(), 2u);
  EXPECT_EQ(cells[0].groups[1].ToString(), "income=>50K");
  EXPECT_EQ(ImbalanceLabel(cells[0].imbalance), "none");
}

TEST(PrepareTest, SubgroupSettingsImbalanceTrainAndTest) {
  const data::TabularDataset d = desk::Generate();
  ExperimentConfig c = Quick();
  c.setting = Setting::kSingleSubgroup;
  c.subgroup_attributes = {"sex"};
  c.imbalances = {0.1, 0.5};
  const auto cells = Prepare(c, d, std::nullopt);
  ASSERT_EQ(cells.size(), 2u);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (const auto* part : {&cells[i].train, &cells[i].test}) {
      const auto sizes = MeasureSizes(*part, cells[i].groups);
      EXPECT_NEAR(std::min(sizes[0], sizes[1]), c.imbalances[i], 2.0 / part->rows());
    }
  }
  c.setting = Setting::kMultiSubgroup;
  c.subgroup_attributes = {"sex", "race"};
  const auto multi = Prepare(c, d, std::nullopt);
  for (const auto& key : multi[0].groups) {
    EXPECT_EQ(key.attributes.size(), 2u);
    EXPECT_GE(MatchRows(multi[0].train, key).size(), c.min_subgroup_size);
  }
}

TEST(PrepareTest, ExplicitTestSetIsUsedWhole) {
  const data::TabularDataset d = desk::Generate(1, 1000, 200);
  const data::TabularDataset t = desk::Generate(2, 300, 60);
  const auto cells = Prepare(Quick(), d, t);
  EXPECT_EQ(cells[0].train.rows(), 1000u);
  EXPECT_EQ(cells[0].test.rows(), 300u);
}

TEST(MatchRowsTest, RejectsUnknownValues) {
  const data::TabularDataset d = desk::Generate(1, 100, 20);
  EXPECT_THROW(MatchRows(d, {{"sex"}, {"Other"}}), InvalidArgumentError);
  EXPECT_EQ(MatchRows(d, {{}, {}}).size(), 100u);
}

TEST(GenerateTest, RunsCoverGridAndNonPrivateRunsUseNoMechanism) {
  const data::TabularDataset d = desk::Generate(1, 1000, 200);
  const ExperimentConfig c = Quick();
  const auto cells = Prepare(c, d, std::nullopt);
  const auto runs = Generate(c, cells, 2);
  ASSERT_EQ(runs.size(), 2u * 2 * 2);
  std::set<std::string> ids;
  for (const auto& r : runs) {
    EXPECT_TRUE(r.error.empty()) << r.error;
    ASSERT_TRUE(r.data.has_value());
    EXPECT_EQ(r.data->rows(), cells[0].train.rows());
    EXPECT_EQ(r.data->provenance(), data::Provenance::kSynthetic);
    ids.insert(RunId(c.model, r));
  }
  EXPECT_EQ(ids.size(), runs.size());
  EXPECT_TRUE(ids.contains("privbayes/e1/i0/f1/s1"));
}

TEST(GenerateTest, TestDataIsRefused) {
  const data::TabularDataset d = desk::Generate(1, 1000, 200);
  ExperimentConfig c = Quick();
  c.l = 1;
  c.k = 1;
  auto cells = Prepare(c, d, std::nullopt);
  cells[0].train = cells[0].train.WithProvenance(data::Provenance::kTest);
  const auto runs = Generate(c, cells, 1);
  for (const auto& r : runs) {
    EXPECT_FALSE(r.data.has_value());
    EXPECT_EQ(r.error_kind, "state_error");
  }
}

TEST(EvaluateTest, RecordsAndAggregates) {
  const data::TabularDataset d = desk::Generate(1, 1500, 300);
  const ExperimentConfig c = Quick();
  const auto cells = Prepare(c, d, std::nullopt);
  const AuditReport report = Evaluate(c, cells, Generate(c, cells, 1), 1);
  EXPECT_TRUE(report.failures.empty());
  std::set<std::string> models;
  std::set<std::string> metrics;
  for (const Record& r : report.records) {
    models.insert(r.model);
    metrics.insert(r.metric);
    EXPECT_EQ(r.setting, "class");
    EXPECT_EQ(r.imbalance, "none");
  }
  EXPECT_EQ(models, (std::set<std::string>{"privbayes", "dplr", "real"}));
  EXPECT_TRUE(metrics.contains("size"));
  EXPECT_TRUE(metrics.contains("precision"));
  EXPECT_TRUE(metrics.contains("epsilon_spent"));

  const auto aggregates = AggregateRecords(report.records);
  bool found = false;
  for (const Aggregate& a : aggregates) {
    if (a.model == "privbayes" && std::isinf(a.epsilon) && a.metric == "size" &&
        a.group == "income=>50K") {
      found = true;
      EXPECT_EQ(a.count, 4u);
      EXPECT_NEAR(a.mean, 0.2, 0.05);
    }
  }
  EXPECT_TRUE(found);
}

TEST(AggregateTest, SampleStatisticsAndSkippedValues) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<Record> records;
  for (double v : {1.0, 2.0, 3.0, nan}) {
    records.push_back({"r", "dplr", 1.0, "none", "class", "g", "precision", v});
  }
  const auto a = AggregateRecords(records);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].count, 3u);
  EXPECT_EQ(a[0].skipped, 1u);
  EXPECT_DOUBLE_EQ(a[0].mean, 2.0);
  EXPECT_DOUBLE_EQ(a[0].stddev, 1.0);
}

TEST(CsvTest, RecordsAndFailuresRoundTrip) {
  const std::vector<Record> records = {
      {"privbayes/e0/i0/f0/s0", "privbayes", 0.1, "0.25", "single-subgroup",
       "sex=Female", "size", 0.123456789012345},
      {"real/i0", "real", std::numeric_limits<double>::infinity(), "none", "class",
       "income=>50K", "precision", std::numeric_limits<double>::quiet_NaN()}};
  std::stringstream buf;
  WriteRecordsCsv(records, buf);
  EXPECT_EQ(buf.str().substr(0, buf.str().find('\n')),
            "run_id,model,epsilon,imbalance,setting,group,metric,value");
  const auto back = ReadRecordsCsv(buf);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].value, records[0].value);
  EXPECT_TRUE(std::isinf(back[1].epsilon));
  EXPECT_TRUE(std::isnan(back[1].value));
  std::stringstream again;
  WriteRecordsCsv(back, again);
  std::stringstream first;
  WriteRecordsCsv(records, first);
  EXPECT_EQ(again.str(), first.str());

  const std::vector<Failure> failures = {{"dpwgan/e0/i0/f0/s0", "generate",
                                          "data_error", "bad, \"quoted\" text"}};
  std::stringstream fbuf;
  WriteFailuresCsv(failures, fbuf);
  const auto fback = ReadFailuresCsv(fbuf);
  ASSERT_EQ(fback.size(), 1u);
  // Messages are flattened to one comma-free field.
  EXPECT_EQ(fback[0].message, "bad; \"quoted\" text");
  EXPECT_EQ(fback[0].kind, "data_error");
}

TEST(ReportTest, EmitsFilesAndCharts) {
  const fs::path dir = TempDir("report");
  const data::TabularDataset d = desk::Generate(1, 1000, 200);
  ExperimentConfig c = Quick();
  c.l = 1;
  c.k = 1;
  const auto cells = Prepare(c, d, std::nullopt);
  const AuditReport report = Evaluate(c, cells, Generate(c, cells, 1), 1);
  EmitReport(report, c, dir);
  for (const char* f : {"records.csv", "aggregates.csv", "failures.csv", "config.json",
                        "chart_size_imbalance_none.svg"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream svg(dir / "chart_size_imbalance_none.svg");
  std::stringstream text;
  text << svg.rdbuf();
  EXPECT_EQ(text.str().rfind("<svg", 0), 0u);
  EXPECT_NE(text.str().find("</svg>"), std::string::npos);
}

TEST(DeterminismTest, WorkerCountDoesNotChangeRecords) {
  const fs::path dir = TempDir("determinism");
  const data::TabularDataset d = desk::Generate(1, 1000, 200);
  const auto schema_path = dir / "schema.json";
  const auto data_path = dir / "data.csv";
  std::ofstream(schema_path) << d.schema().ToJson();
  data::SaveCsv(d, data_path);
  ExperimentConfig c = Quick();
  c.data_path = data_path;
  c.schema_path = schema_path;
  std::stringstream one;
  std::stringstream three;
  WriteRecordsCsv(RunExperiment(c, 1).records, one);
  WriteRecordsCsv(RunExperiment(c, 3).records, three);
  EXPECT_EQ(one.str(), three.str());
  c.seed = 18;
  std::stringstream other;
  WriteRecordsCsv(RunExperiment(c, 1).records, other);
  EXPECT_NE(one.str(), other.str());
}

}  // namespace
}  // namespace dpsynth::harness
