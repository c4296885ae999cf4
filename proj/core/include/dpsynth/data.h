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
// Tabular dataset model: schema, CSV ingestion, discretization, and the
// class/subgroup resampling used to prepare imbalanced experiments.
#ifndef DPSYNTH_DATA_H_
#define DPSYNTH_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dpsynth/rng.h"

namespace dpsynth::data {

enum class ColumnKind { kCategorical, kNumerical };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::kCategorical;
  // Categorical only.
  std::vector<std::string> categories;
  // Numerical only. Public bounds; values outside are clamped.
  double min = 0.0;
  double max = 1.0;

  static Column Categorical(std::string name, std::vector<std::string> cats);
  static Column Numerical(std::string name, double min, double max);
};

inline constexpr int kDefaultBinCount = 50;

class Schema {
 public:
  // Throws InvalidArgumentError when an invariant does not hold.
  Schema(std::vector<Column> columns, std::string class_column,
         std::vector<std::string> subgroup_columns,
         int bin_count = kDefaultBinCount);

  static Schema FromJson(std::string_view text);
  static Schema Load(const std::filesystem::path& path);
  std::string ToJson() const;

  const std::vector<Column>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  const Column& column(std::size_t i) const { return columns_.at(i); }
  const std::string& class_column() const { return class_column_; }
  const std::vector<std::string>& subgroup_columns() const {
    return subgroup_columns_;
  }
  int bin_count() const { return bin_count_; }
  int class_index() const { return class_index_; }

  // Throws InvalidArgumentError for unknown names.
  int IndexOf(std::string_view name) const;
  bool Contains(std::string_view name) const;

  // Number of codes a column can take once encoded.
  int DomainSize(std::size_t column) const;
  // Human-readable value for a code: the category, or the bin midpoint.
  std::string Label(std::size_t column, int code) const;
  // Code for a label (a category, or a bin midpoint as Label prints it), or
  // -1.
  int CodeOf(std::size_t column, std::string_view label) const;

  Schema WithBinCount(int bins) const;

  bool operator==(const Schema& other) const;

 private:
  std::vector<Column> columns_;
  std::string class_column_;
  std::vector<std::string> subgroup_columns_;
  int bin_count_;
  int class_index_ = -1;
};

// Where a dataset came from. The harness refuses to train on test data.
enum class Provenance { kUnspecified, kTrain, kTest, kSynthetic };

std::string_view ProvenanceName(Provenance p);

// n x d matrix of codes (category index or bin index), row-major.
class TabularDataset {
 public:
  TabularDataset(std::shared_ptr<const Schema> schema,
                 std::vector<std::int32_t> cells,
                 Provenance provenance = Provenance::kUnspecified);

  const Schema& schema() const { return *schema_; }
  const std::shared_ptr<const Schema>& schema_ptr() const { return schema_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return schema_->size(); }
  Provenance provenance() const { return provenance_; }

  std::int32_t at(std::size_t row, std::size_t col) const {
    return cells_[row * cols() + col];
  }
  std::span<const std::int32_t> row(std::size_t r) const {
    return {cells_.data() + r * cols(), cols()};
  }
  std::span<const std::int32_t> cells() const { return cells_; }
  std::vector<std::int32_t> ColumnValues(std::size_t col) const;

  // Subset of rows in the given order. Duplicates are allowed.
  TabularDataset Select(std::span<const std::size_t> rows) const;
  TabularDataset WithProvenance(Provenance p) const;

  bool operator==(const TabularDataset& other) const {
    return *schema_ == *other.schema_ && cells_ == other.cells_;
  }

 private:
  std::shared_ptr<const Schema> schema_;
  std::vector<std::int32_t> cells_;
  std::size_t rows_;
  Provenance provenance_;
};

// Parsed CSV prior to discretization. Categorical cells hold the category
// index; numerical cells hold the raw value.
struct RawTable {
  std::shared_ptr<const Schema> schema;
  std::size_t rows = 0;
  std::vector<double> cells;

  double at(std::size_t r, std::size_t c) const {
    return cells[r * schema->size() + c];
  }
};

// CSV parsing. Cells are trimmed and matched case-sensitively; empty cells,
// unknown categories and unparseable numbers raise DataError naming the
// offending row (1-based, header excluded) and column.
RawTable ParseRawCsv(std::istream& in, std::shared_ptr<const Schema> schema,
                     std::string_view source_name = "<stream>");
RawTable LoadRawCsv(const std::filesystem::path& path,
                    std::shared_ptr<const Schema> schema);

// Equal-width binning of numerical columns over the schema bounds.
int BinIndex(double value, double min, double max, int bins);
double BinMidpoint(int bin, double min, double max, int bins);
TabularDataset Discretize(const RawTable& raw, int bins);

// LoadRawCsv followed by Discretize with the schema's bin count.
TabularDataset LoadCsv(const std::filesystem::path& path,
                       std::shared_ptr<const Schema> schema,
                       Provenance provenance = Provenance::kUnspecified);
TabularDataset ParseCsv(std::istream& in, std::shared_ptr<const Schema> schema,
                        Provenance provenance = Provenance::kUnspecified);

// Writes labels (categories, bin midpoints for numerical columns).
void WriteCsv(const TabularDataset& dataset, std::ostream& out);
void SaveCsv(const TabularDataset& dataset, const std::filesystem::path& path);

// Seeded split; the test part gets round(n * test_fraction) rows.
std::pair<TabularDataset, TabularDataset> SplitTrainTest(
    const TabularDataset& dataset, double test_fraction, Rng& rng);

// Down-samples so that, inside every value of `subgroup_column`, both classes
// have the same count. Requires a binary class column.
TabularDataset BalanceClassWithinSubgroup(const TabularDataset& dataset,
                                          std::string_view subgroup_column,
                                          Rng& rng);

// Down-samples a class-balanced, two-valued subgroup column so the smaller
// subgroup makes up `ratio` of the rows, keeping class parity inside both
// subgroups. The output is as large as the available rows allow.
TabularDataset ImbalanceSubgroup(const TabularDataset& dataset,
                                 std::string_view subgroup_column,
                                 double ratio, Rng& rng);

struct SubgroupKey {
  std::vector<std::string> attributes;
  std::vector<std::string> values;

  std::string ToString() const;
  bool operator==(const SubgroupKey&) const = default;
};

struct Subgroup {
  SubgroupKey key;
  std::vector<std::size_t> rows;
};

// Cross-tabulates `attributes` and returns the cells with at least
// `min_size` rows, ordered lexicographically by code tuple.
std::vector<Subgroup> ExtractSubgroups(const TabularDataset& dataset,
                                       std::span<const std::string> attributes,
                                       std::size_t min_size = 25);

// Proportion of rows per class code; entries sum to one.
std::vector<double> ClassDistribution(const TabularDataset& dataset);

// Proportion of rows per code of an arbitrary column.
std::vector<double> ColumnDistribution(const TabularDataset& dataset,
                                       std::size_t column);

}  // namespace dpsynth::data

#endif  // DPSYNTH_DATA_H_
