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
//
// Experiment runner: data preparation, l fits x k samples per cell, the
// real / DP / synth classifiers, long-format records and their aggregates.
//
// Records use the fixed column order
//   run_id,model,epsilon,imbalance,setting,group,metric,value
// where `model` names the source of the classifier's training data
// ("privbayes", "dpwgan", "pategan" for synthetic runs, "dplr" for DP
// classifiers on real data and "real" for the non-private baseline).
#ifndef DPSYNTH_HARNESS_H_
#define DPSYNTH_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpsynth/data.h"
#include "dpsynth/dpwgan.h"
#include "dpsynth/pategan.h"
#include "dpsynth/privbayes.h"

namespace dpsynth::harness {

enum class Setting { kClass, kSingleSubgroup, kMultiSubgroup };
enum class ModelKind { kPrivBayes, kDpWgan, kPateGan };

std::string_view SettingName(Setting s);
Setting ParseSetting(std::string_view name);
std::string_view ModelName(ModelKind m);
ModelKind ParseModel(std::string_view name);

inline constexpr char kWorkersEnv[] = "DPSYNTH_WORKERS";

struct ExperimentConfig {
  std::filesystem::path data_path;
  std::filesystem::path schema_path;
  // Optional explicit test file; otherwise a seeded split of data_path.
  std::filesystem::path test_path;
  ModelKind model = ModelKind::kPrivBayes;
  std::vector<double> epsilons = {0.01, 0.1, 1.0, 10.0, 100.0,
                                  std::numeric_limits<double>::infinity()};
  double delta = 1e-5;
  // Minority subgroup ratios; ignored in the class setting.
  std::vector<double> imbalances = {0.01, 0.05, 0.1, 0.25, 0.5};
  Setting setting = Setting::kClass;
  // The first attribute is the one balanced and imbalanced; the multi
  // subgroup setting intersects all of them. Empty means the schema's
  // subgroup columns.
  std::vector<std::string> subgroup_attributes;
  int l = 10;
  int k = 10;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  double test_fraction = 1.0 / 3.0;
  std::size_t min_subgroup_size = 25;
  bool classifiers = true;
  double regularization = 1e-3;

  privbayes::PrivBayesConfig privbayes;
  dpwgan::DpWganConfig dpwgan;
  pategan::PateGanConfig pategan;

  // Throws InvalidArgumentError when an invariant does not hold.
  void Validate() const;
  // Relative paths inside the JSON resolve against `base_dir`.
  static ExperimentConfig FromJson(std::string_view text,
                                   const std::filesystem::path& base_dir = {});
  static ExperimentConfig Load(const std::filesystem::path& path);
  std::string ToJson() const;

  std::vector<std::string> ResolvedSubgroupAttributes(
      const data::Schema& schema) const;
};

// Number of workers from the environment (at least 1); falls back to the
// hardware concurrency.
int WorkerCount();

// Runs task(i) for i in [0, count) on `workers` threads. Exceptions escape
// only for the lowest failing index, after all tasks finish.
void ParallelFor(std::size_t count, int workers,
                 const std::function<void(std::size_t)>& task);

struct PreparedCell {
  // NaN in the class setting.
  double imbalance = std::numeric_limits<double>::quiet_NaN();
  data::TabularDataset train;
  data::TabularDataset test;
  // Groups whose sizes are measured and whose accuracy is reported.
  std::vector<data::SubgroupKey> groups;
};

std::string ImbalanceLabel(double imbalance);

// Splits (unless a test set is given), balances and imbalances per the
// setting. One cell per imbalance ratio, or a single cell in the class
// setting.
std::vector<PreparedCell> Prepare(const ExperimentConfig& config,
                                  const data::TabularDataset& full,
                                  const std::optional<data::TabularDataset>& test);

// Proportion of rows matching each key. Keys name columns and labels.
std::vector<double> MeasureSizes(const data::TabularDataset& dataset,
                                 const std::vector<data::SubgroupKey>& keys);
// Rows matching a key.
std::vector<std::size_t> MatchRows(const data::TabularDataset& dataset,
                                   const data::SubgroupKey& key);

struct SyntheticRun {
  std::size_t epsilon_index = 0;
  std::size_t imbalance_index = 0;
  int fit = 0;
  int sample = 0;
  std::optional<data::TabularDataset> data;
  bool degenerate = false;
  double epsilon_spent = 0.0;
  std::string error;  // non-empty when the fit or the sample failed
  std::string error_kind;
};

// Synthetic run identifier, e.g. "privbayes/e2/i0/f3/s7".
std::string RunId(ModelKind model, const SyntheticRun& run);

// Optional sink for trained model artifacts: (epsilon index, imbalance
// index, fit, model JSON, training log CSV).
using ModelSink = std::function<void(std::size_t, std::size_t, int,
                                     const std::string&, const std::string&)>;

std::vector<SyntheticRun> Generate(const ExperimentConfig& config,
                                   const std::vector<PreparedCell>& cells,
                                   int workers, const ModelSink& sink = {});

struct Record {
  std::string run_id;
  std::string model;
  double epsilon = 0.0;
  std::string imbalance;
  std::string setting;
  std::string group;
  std::string metric;
  double value = 0.0;
};

struct Failure {
  std::string run_id;
  std::string stage;
  std::string kind;
  std::string message;
};

struct Aggregate {
  std::string model;
  double epsilon = 0.0;
  std::string imbalance;
  std::string setting;
  std::string group;
  std::string metric;
  std::size_t count = 0;    // finite values
  std::size_t skipped = 0;  // undefined values
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
};

struct AuditReport {
  std::vector<Record> records;
  std::vector<Failure> failures;
};

AuditReport Evaluate(const ExperimentConfig& config,
                     const std::vector<PreparedCell>& cells,
                     const std::vector<SyntheticRun>& runs, int workers);

// Loads data, prepares, generates and evaluates.
AuditReport RunExperiment(const ExperimentConfig& config, int workers);

// Mean and sample standard deviation per (model, epsilon, imbalance,
// setting, group, metric), in order of first appearance. NaN values are
// counted as skipped.
std::vector<Aggregate> AggregateRecords(const std::vector<Record>& records);

void WriteRecordsCsv(const std::vector<Record>& records, std::ostream& out);
std::vector<Record> ReadRecordsCsv(std::istream& in);
void WriteAggregatesCsv(const std::vector<Aggregate>& aggregates,
                        std::ostream& out);
// Commas and newlines inside messages are written as ';' and ' '.
void WriteFailuresCsv(const std::vector<Failure>& failures, std::ostream& out);
std::vector<Failure> ReadFailuresCsv(std::istream& in);

// Writes records.csv, aggregates.csv, failures.csv, config.json and one SVG
// chart per (imbalance, metric) present. Throws IoError on write failures.
void EmitReport(const AuditReport& report, const ExperimentConfig& config,
                const std::filesystem::path& out_dir);

// Line chart of mean metric value against epsilon with +-1 std bands, one
// series per (model, group).
std::string RenderChart(const std::vector<Aggregate>& aggregates,
                        std::string_view imbalance, std::string_view metric);

}  // namespace dpsynth::harness

#endif  // DPSYNTH_HARNESS_H_
