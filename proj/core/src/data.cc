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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "dpsynth/errors.h"
#include "dpsynth/format.h"
#include "json.hpp"

namespace dpsynth::data {
namespace {

using Json = nlohmann::json;

std::string_view Trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> SplitCommas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(Trim(line.substr(start)));
      return out;
    }
    out.push_back(Trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::string CellContext(std::string_view source, std::size_t row,
                        std::string_view column) {
  std::ostringstream os;
  os << source << ": row " << row << ", column '" << column << "'";
  return os.str();
}

}  // namespace

Column Column::Categorical(std::string name, std::vector<std::string> cats) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::kCategorical;
  c.categories = std::move(cats);
  return c;
}

Column Column::Numerical(std::string name, double min, double max) {
  Column c;
  c.name = std::move(name);
  c.kind = ColumnKind::kNumerical;
  c.min = min;
  c.max = max;
  return c;
}

Schema::Schema(std::vector<Column> columns, std::string class_column,
               std::vector<std::string> subgroup_columns, int bin_count)
    : columns_(std::move(columns)),
      class_column_(std::move(class_column)),
      subgroup_columns_(std::move(subgroup_columns)),
      bin_count_(bin_count) {
  if (columns_.empty()) throw InvalidArgumentError("schema has no columns");
  if (bin_count_ < 2) {
    throw InvalidArgumentError("bin_count must be at least 2, got " +
                               std::to_string(bin_count_));
  }
  std::set<std::string> names;
  for (const Column& c : columns_) {
    if (c.name.empty()) throw InvalidArgumentError("empty column name");
    if (!names.insert(c.name).second) {
      throw InvalidArgumentError("duplicate column '" + c.name + "'");
    }
    if (c.kind == ColumnKind::kCategorical) {
      if (c.categories.empty()) {
        throw InvalidArgumentError("column '" + c.name +
                                   "' has an empty category list");
      }
      std::set<std::string> seen(c.categories.begin(), c.categories.end());
      if (seen.size() != c.categories.size()) {
        throw InvalidArgumentError("column '" + c.name +
                                   "' has duplicate categories");
      }
    } else if (!(c.min < c.max) || !std::isfinite(c.min) ||
               !std::isfinite(c.max)) {
      throw InvalidArgumentError("column '" + c.name +
                                 "' needs finite bounds with min < max");
    }
  }
  if (!names.contains(class_column_)) {
    throw InvalidArgumentError("class column '" + class_column_ +
                               "' is not in the schema");
  }
  for (const std::string& s : subgroup_columns_) {
    if (!names.contains(s)) {
      throw InvalidArgumentError("subgroup column '" + s +
                                 "' is not in the schema");
    }
  }
  class_index_ = IndexOf(class_column_);
}

Schema Schema::FromJson(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw InvalidArgumentError(std::string("schema is not valid JSON: ") +
                               e.what());
  }
  try {
    std::vector<Column> columns;
    for (const Json& jc : j.at("columns")) {
      const std::string name = jc.at("name").get<std::string>();
      const std::string kind = jc.value("kind", "categorical");
      if (kind == "categorical") {
        columns.push_back(Column::Categorical(
            name, jc.at("categories").get<std::vector<std::string>>()));
      } else if (kind == "numerical") {
        const auto bounds = jc.at("bounds").get<std::vector<double>>();
        if (bounds.size() != 2) {
          throw InvalidArgumentError("bounds of '" + name +
                                     "' must be [min, max]");
        }
        columns.push_back(Column::Numerical(name, bounds[0], bounds[1]));
      } else {
        throw InvalidArgumentError("unknown column kind '" + kind + "'");
      }
    }
    return Schema(std::move(columns), j.at("class_column").get<std::string>(),
                  j.value("subgroup_columns", std::vector<std::string>{}),
                  j.value("bin_count", kDefaultBinCount));
  } catch (const Json::exception& e) {
    throw InvalidArgumentError(std::string("malformed schema: ") + e.what());
  }
}

Schema Schema::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return FromJson(ss.str());
}

std::string Schema::ToJson() const {
  Json cols = Json::array();
  for (const Column& c : columns_) {
    Json jc;
    jc["name"] = c.name;
    if (c.kind == ColumnKind::kCategorical) {
      jc["kind"] = "categorical";
      jc["categories"] = c.categories;
    } else {
      jc["kind"] = "numerical";
      jc["bounds"] = {c.min, c.max};
    }
    cols.push_back(std::move(jc));
  }
  Json j;
  j["columns"] = std::move(cols);
  j["class_column"] = class_column_;
  j["subgroup_columns"] = subgroup_columns_;
  j["bin_count"] = bin_count_;
  return j.dump(2);
}

int Schema::IndexOf(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return static_cast<int>(i);
  }
  throw InvalidArgumentError("unknown column '" + std::string(name) + "'");
}

bool Schema::Contains(std::string_view name) const {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const Column& c) { return c.name == name; });
}

int Schema::DomainSize(std::size_t column) const {
  const Column& c = columns_.at(column);
  return c.kind == ColumnKind::kCategorical
             ? static_cast<int>(c.categories.size())
             : bin_count_;
}

std::string Schema::Label(std::size_t column, int code) const {
  const Column& c = columns_.at(column);
  if (c.kind == ColumnKind::kCategorical) return c.categories.at(code);
  return FormatDouble(BinMidpoint(code, c.min, c.max, bin_count_));
}

int Schema::CodeOf(std::size_t column, std::string_view label) const {
  const Column& c = columns_.at(column);
  if (c.kind == ColumnKind::kNumerical) {
    for (int b = 0; b < bin_count_; ++b) {
      if (Label(column, b) == label) return b;
    }
    return -1;
  }
  for (std::size_t i = 0; i < c.categories.size(); ++i) {
    if (c.categories[i] == label) return static_cast<int>(i);
  }
  return -1;
}

Schema Schema::WithBinCount(int bins) const {
  return Schema(columns_, class_column_, subgroup_columns_, bins);
}

bool Schema::operator==(const Schema& other) const {
  if (columns_.size() != other.columns_.size()) return false;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const Column& a = columns_[i];
    const Column& b = other.columns_[i];
    if (a.name != b.name || a.kind != b.kind || a.categories != b.categories ||
        a.min != b.min || a.max != b.max) {
      return false;
    }
  }
  return class_column_ == other.class_column_ &&
         subgroup_columns_ == other.subgroup_columns_ &&
         bin_count_ == other.bin_count_;
}

std::string_view ProvenanceName(Provenance p) {
  switch (p) {
    case Provenance::kTrain:
      return "train";
    case Provenance::kTest:
      return "test";
    case Provenance::kSynthetic:
      return "synthetic";
    case Provenance::kUnspecified:
      break;
  }
  return "unspecified";
}

TabularDataset::TabularDataset(std::shared_ptr<const Schema> schema,
                               std::vector<std::int32_t> cells,
                               Provenance provenance)
    : schema_(std::move(schema)),
      cells_(std::move(cells)),
      rows_(0),
      provenance_(provenance) {
  if (!schema_) throw InvalidArgumentError("dataset needs a schema");
  const std::size_t d = schema_->size();
  if (cells_.size() % d != 0) {
    throw InvalidArgumentError("cell count is not a multiple of the columns");
  }
  rows_ = cells_.size() / d;
  if (rows_ == 0) throw InvalidArgumentError("dataset must have rows");
  for (std::size_t c = 0; c < d; ++c) {
    const int domain = schema_->DomainSize(c);
    for (std::size_t r = 0; r < rows_; ++r) {
      const std::int32_t v = cells_[r * d + c];
      if (v < 0 || v >= domain) {
        throw DataError("code " + std::to_string(v) + " out of range for " +
                        CellContext("dataset", r + 1, schema_->column(c).name));
      }
    }
  }
}

std::vector<std::int32_t> TabularDataset::ColumnValues(std::size_t col) const {
  std::vector<std::int32_t> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, col);
  return out;
}

TabularDataset TabularDataset::Select(std::span<const std::size_t> rows) const {
  const std::size_t d = cols();
  std::vector<std::int32_t> cells;
  cells.reserve(rows.size() * d);
  for (std::size_t r : rows) {
    if (r >= rows_) throw InvalidArgumentError("row index out of range");
    const auto src = row(r);
    cells.insert(cells.end(), src.begin(), src.end());
  }
  return TabularDataset(schema_, std::move(cells), provenance_);
}

TabularDataset TabularDataset::WithProvenance(Provenance p) const {
  TabularDataset copy = *this;
  copy.provenance_ = p;
  return copy;
}

RawTable ParseRawCsv(std::istream& in, std::shared_ptr<const Schema> schema,
                     std::string_view source_name) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(std::string(source_name) + ": missing header row");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  const auto header = SplitCommas(line);
  const std::size_t d = schema->size();
  // Position of each schema column in the file.
  std::vector<std::size_t> source_index(d);
  for (std::size_t c = 0; c < d; ++c) {
    const std::string& name = schema->column(c).name;
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError(std::string(source_name) + ": missing column '" + name +
                      "' in header");
    }
    source_index[c] = static_cast<std::size_t>(it - header.begin());
  }

  RawTable raw;
  raw.schema = schema;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    ++row;
    const auto fields = SplitCommas(line);
    if (fields.size() != header.size()) {
      std::ostringstream os;
      os << source_name << ": row " << row << " has " << fields.size()
         << " fields, expected " << header.size();
      throw DataError(os.str());
    }
    for (std::size_t c = 0; c < d; ++c) {
      const Column& col = schema->column(c);
      const std::string_view cell = fields[source_index[c]];
      if (cell.empty()) {
        throw DataError("missing value at " +
                        CellContext(source_name, row, col.name));
      }
      if (col.kind == ColumnKind::kCategorical) {
        const int code = schema->CodeOf(c, cell);
        if (code < 0) {
          throw DataError("unknown category '" + std::string(cell) + "' at " +
                          CellContext(source_name, row, col.name));
        }
        raw.cells.push_back(code);
      } else {
        double v = 0.0;
        const auto res = std::from_chars(cell.data(), cell.data() + cell.size(),
                                         v);
        if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() ||
            !std::isfinite(v)) {
          throw DataError("unparseable number '" + std::string(cell) +
                          "' at " + CellContext(source_name, row, col.name));
        }
        raw.cells.push_back(v);
      }
    }
  }
  raw.rows = row;
  if (raw.rows == 0) throw DataError(std::string(source_name) + ": no rows");
  return raw;
}

RawTable LoadRawCsv(const std::filesystem::path& path,
                    std::shared_ptr<const Schema> schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return ParseRawCsv(in, std::move(schema), path.string());
}

int BinIndex(double value, double min, double max, int bins) {
  if (bins < 2) throw InvalidArgumentError("bins must be at least 2");
  if (!(value > min)) return 0;
  if (value >= max) return bins - 1;
  const int b = static_cast<int>((value - min) / (max - min) * bins);
  return std::clamp(b, 0, bins - 1);
}

double BinMidpoint(int bin, double min, double max, int bins) {
  return min + (bin + 0.5) * (max - min) / bins;
}

TabularDataset Discretize(const RawTable& raw, int bins) {
  if (bins < 2) {
    throw InvalidArgumentError("bins must be at least 2, got " +
                               std::to_string(bins));
  }
  auto schema = std::make_shared<const Schema>(raw.schema->WithBinCount(bins));
  const std::size_t d = schema->size();
  std::vector<std::int32_t> cells(raw.rows * d);
  for (std::size_t r = 0; r < raw.rows; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const Column& col = schema->column(c);
      const double v = raw.at(r, c);
      cells[r * d + c] = col.kind == ColumnKind::kCategorical
                             ? static_cast<std::int32_t>(v)
                             : BinIndex(v, col.min, col.max, bins);
    }
  }
  return TabularDataset(std::move(schema), std::move(cells));
}

TabularDataset LoadCsv(const std::filesystem::path& path,
                       std::shared_ptr<const Schema> schema,
                       Provenance provenance) {
  const int bins = schema->bin_count();
  return Discretize(LoadRawCsv(path, std::move(schema)), bins)
      .WithProvenance(provenance);
}

TabularDataset ParseCsv(std::istream& in, std::shared_ptr<const Schema> schema,
                        Provenance provenance) {
  const int bins = schema->bin_count();
  return Discretize(ParseRawCsv(in, std::move(schema)), bins)
      .WithProvenance(provenance);
}

void WriteCsv(const TabularDataset& dataset, std::ostream& out) {
  const Schema& schema = dataset.schema();
  for (std::size_t c = 0; c < schema.size(); ++c) {
    out << (c ? "," : "") << schema.column(c).name;
  }
  out << '\n';
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    for (std::size_t c = 0; c < schema.size(); ++c) {
      out << (c ? "," : "") << schema.Label(c, dataset.at(r, c));
    }
    out << '\n';
  }
}

void SaveCsv(const TabularDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  WriteCsv(dataset, out);
  if (!out) throw IoError("write failed for " + path.string());
}

std::pair<TabularDataset, TabularDataset> SplitTrainTest(
    const TabularDataset& dataset, double test_fraction, Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidArgumentError("test_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> idx(dataset.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(dataset.rows())));
  if (n_test == 0 || n_test >= dataset.rows()) {
    throw InvalidArgumentError("dataset too small to split");
  }
  std::vector<std::size_t> test(idx.begin(), idx.begin() + n_test);
  std::vector<std::size_t> train(idx.begin() + n_test, idx.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {dataset.Select(train).WithProvenance(Provenance::kTrain),
          dataset.Select(test).WithProvenance(Provenance::kTest)};
}

namespace {

void RequireBinaryClass(const Schema& schema) {
  if (schema.DomainSize(schema.class_index()) != 2) {
    throw InvalidArgumentError("class column '" + schema.class_column() +
                               "' must be binary");
  }
}

// rows_by[group code][class code] -> shuffled row indices.
std::map<int, std::vector<std::vector<std::size_t>>> GroupRowsByClass(
    const TabularDataset& ds, int group_col, Rng& rng) {
  const int class_col = ds.schema().class_index();
  std::map<int, std::vector<std::vector<std::size_t>>> out;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    auto& slot = out[ds.at(r, group_col)];
    slot.resize(2);
    slot[ds.at(r, class_col)].push_back(r);
  }
  for (auto& [g, by_class] : out) {
    for (auto& rows : by_class) std::shuffle(rows.begin(), rows.end(), rng.engine());
  }
  return out;
}

}  // namespace

TabularDataset BalanceClassWithinSubgroup(const TabularDataset& dataset,
                                          std::string_view subgroup_column,
                                          Rng& rng) {
  const Schema& schema = dataset.schema();
  RequireBinaryClass(schema);
  const int group_col = schema.IndexOf(subgroup_column);
  auto groups = GroupRowsByClass(dataset, group_col, rng);
  std::vector<std::size_t> keep;
  for (auto& [g, by_class] : groups) {
    const std::size_t m = std::min(by_class[0].size(), by_class[1].size());
    if (m == 0) {
      throw DataError("subgroup " + std::string(subgroup_column) + "=" +
                      schema.Label(group_col, g) +
                      " has no members of one class");
    }
    for (auto& rows : by_class) keep.insert(keep.end(), rows.begin(), rows.begin() + m);
  }
  std::sort(keep.begin(), keep.end());
  return dataset.Select(keep);
}

TabularDataset ImbalanceSubgroup(const TabularDataset& dataset,
                                 std::string_view subgroup_column,
                                 double ratio, Rng& rng) {
  if (!(ratio > 0.0 && ratio <= 0.5)) {
    throw InvalidArgumentError("imbalance ratio must be in (0, 0.5], got " +
                               FormatDouble(ratio));
  }
  const Schema& schema = dataset.schema();
  RequireBinaryClass(schema);
  const int group_col = schema.IndexOf(subgroup_column);
  auto groups = GroupRowsByClass(dataset, group_col, rng);
  if (groups.size() != 2) {
    throw DataError("subgroup column '" + std::string(subgroup_column) +
                    "' must take exactly two values, found " +
                    std::to_string(groups.size()));
  }
  struct Group {
    int code;
    std::size_t capacity;  // rows usable while keeping class parity
    std::vector<std::vector<std::size_t>>* by_class;
  };
  std::vector<Group> g;
  for (auto& [code, by_class] : groups) {
    const std::size_t per_class =
        std::min(by_class[0].size(), by_class[1].size());
    g.push_back({code, 2 * per_class, &by_class});
  }
  // Minority is the smaller group; ties go to the lower code.
  if (g[1].capacity < g[0].capacity) std::swap(g[0], g[1]);
  const Group& minority = g[0];
  const Group& majority = g[1];

  std::size_t total = 0;
  std::size_t minority_count = 0;
  for (std::size_t t = minority.capacity + majority.capacity; t > 0; --t) {
    const auto m =
        static_cast<std::size_t>(std::llround(ratio * static_cast<double>(t)));
    if (m <= minority.capacity && t - m <= majority.capacity) {
      total = t;
      minority_count = m;
      break;
    }
  }
  if (minority_count < 2) {
    throw DataError("imbalance ratio " + FormatDouble(ratio) +
                    " is unattainable without up-sampling: the minority "
                    "subgroup would have fewer than one row per class");
  }
  std::vector<std::size_t> keep;
  const auto take = [&](const Group& grp, std::size_t count) {
    const std::size_t first = count / 2;
    const std::size_t second = count - first;
    // Alternate which class receives the odd row so neither is favoured.
    const int extra_class = static_cast<int>(rng.UniformIndex(2));
    const std::size_t n0 = extra_class == 0 ? second : first;
    const std::size_t n1 = extra_class == 0 ? first : second;
    auto& by_class = *grp.by_class;
    keep.insert(keep.end(), by_class[0].begin(), by_class[0].begin() + n0);
    keep.insert(keep.end(), by_class[1].begin(), by_class[1].begin() + n1);
  };
  take(minority, minority_count);
  take(majority, total - minority_count);
  std::sort(keep.begin(), keep.end());
  return dataset.Select(keep);
}

std::string SubgroupKey::ToString() const {
  std::string out;
  for (std::size_t i = 0; i < attributes.size(); ++i) {
    if (i) out += '&';
    out += attributes[i];
    out += '=';
    out += values[i];
  }
  return out;
}

std::vector<Subgroup> ExtractSubgroups(const TabularDataset& dataset,
                                       std::span<const std::string> attributes,
                                       std::size_t min_size) {
  if (min_size < 1) throw InvalidArgumentError("min_size must be positive");
  const Schema& schema = dataset.schema();
  std::vector<int> cols;
  for (const std::string& a : attributes) {
    const int c = schema.IndexOf(a);
    if (std::find(cols.begin(), cols.end(), c) != cols.end()) {
      throw InvalidArgumentError("attribute '" + a + "' listed twice");
    }
    cols.push_back(c);
  }
  std::map<std::vector<int>, std::vector<std::size_t>> cells;
  std::vector<int> key(cols.size());
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    for (std::size_t i = 0; i < cols.size(); ++i) key[i] = dataset.at(r, cols[i]);
    cells[key].push_back(r);
  }
  std::vector<Subgroup> out;
  for (auto& [codes, rows] : cells) {
    if (rows.size() < min_size) continue;
    Subgroup s;
    s.key.attributes.assign(attributes.begin(), attributes.end());
    for (std::size_t i = 0; i < cols.size(); ++i) {
      s.key.values.push_back(schema.Label(cols[i], codes[i]));
    }
    s.rows = std::move(rows);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> ColumnDistribution(const TabularDataset& dataset,
                                       std::size_t column) {
  std::vector<double> p(dataset.schema().DomainSize(column), 0.0);
  for (std::size_t r = 0; r < dataset.rows(); ++r) p[dataset.at(r, column)] += 1;
  for (double& v : p) v /= static_cast<double>(dataset.rows());
  return p;
}

std::vector<double> ClassDistribution(const TabularDataset& dataset) {
  return ColumnDistribution(dataset, dataset.schema().class_index());
}

}  // namespace dpsynth::data
