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
#include "dpsynth/privbayes.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "dpsynth/errors.h"
#include "dpsynth/format.h"
#include "dpsynth/mechanisms.h"
#include "json.hpp"

namespace dpsynth::privbayes {
namespace {

using data::TabularDataset;

// Above this many cells the joint counts are accumulated sparsely.
constexpr std::size_t kDenseCellLimit = 1u << 22;

double PLogP(double count, double total) {
  if (count <= 0.0) return 0.0;
  const double p = count / total;
  return p * std::log2(p);
}

// Calls visit(k_subset) for every size-k subset of `items`, in lexicographic
// order of positions.
template <typename Visit>
void ForEachSubset(const std::vector<int>& items, int k, Visit&& visit) {
  const int n = static_cast<int>(items.size());
  std::vector<int> pos(k);
  std::iota(pos.begin(), pos.end(), 0);
  std::vector<int> subset(k);
  while (true) {
    for (int i = 0; i < k; ++i) subset[i] = items[pos[i]];
    visit(subset);
    int i = k - 1;
    while (i >= 0 && pos[i] == n - k + i) --i;
    if (i < 0) return;
    ++pos[i];
    for (int j = i + 1; j < k; ++j) pos[j] = pos[j - 1] + 1;
  }
}

std::size_t ConfigurationCount(const data::Schema& schema,
                               std::span<const int> parents) {
  std::size_t n = 1;
  for (int p : parents) n *= static_cast<std::size_t>(schema.DomainSize(p));
  return n;
}

std::size_t Configuration(std::span<const std::int32_t> row,
                          std::span<const int> parents,
                          const data::Schema& schema) {
  std::size_t idx = 0;
  for (int p : parents) {
    idx = idx * static_cast<std::size_t>(schema.DomainSize(p)) +
          static_cast<std::size_t>(row[p]);
  }
  return idx;
}

}  // namespace

double MutualInformation(const ContingencyTable& table) {
  if (table.rows <= 0 || table.cols <= 0 ||
      table.counts.size() != static_cast<std::size_t>(table.rows) * table.cols) {
    throw InvalidArgumentError("contingency table has inconsistent shape");
  }
  double total = 0.0;
  std::vector<double> row_sum(table.rows, 0.0);
  std::vector<double> col_sum(table.cols, 0.0);
  for (int r = 0; r < table.rows; ++r) {
    for (int c = 0; c < table.cols; ++c) {
      const double v = table.at(r, c);
      if (v < 0.0 || !std::isfinite(v)) {
        throw InvalidArgumentError("contingency counts must be non-negative");
      }
      row_sum[r] += v;
      col_sum[c] += v;
      total += v;
    }
  }
  if (total <= 0.0) throw InvalidArgumentError("contingency table is empty");
  double mi = 0.0;
  for (int r = 0; r < table.rows; ++r) {
    for (int c = 0; c < table.cols; ++c) {
      const double v = table.at(r, c);
      if (v > 0.0) mi += v / total * std::log2(v * total / (row_sum[r] * col_sum[c]));
    }
  }
  return std::max(mi, 0.0);
}

double ColumnMutualInformation(const TabularDataset& dataset, int child,
                               std::span<const int> parents) {
  const data::Schema& schema = dataset.schema();
  const std::size_t domain = schema.DomainSize(child);
  const std::size_t configs = ConfigurationCount(schema, parents);
  const double n = static_cast<double>(dataset.rows());

  std::vector<double> child_counts(domain, 0.0);
  // H(X) + H(Pi) - H(X, Pi), all in bits.
  double h_joint = 0.0;
  double h_parent = 0.0;
  if (configs * domain <= kDenseCellLimit) {
    std::vector<double> joint(configs * domain, 0.0);
    std::vector<double> parent_counts(configs, 0.0);
    for (std::size_t r = 0; r < dataset.rows(); ++r) {
      const auto row = dataset.row(r);
      const std::size_t cfg = Configuration(row, parents, schema);
      joint[cfg * domain + row[child]] += 1;
      parent_counts[cfg] += 1;
      child_counts[row[child]] += 1;
    }
    for (double v : joint) h_joint -= PLogP(v, n);
    for (double v : parent_counts) h_parent -= PLogP(v, n);
  } else {
    std::unordered_map<std::size_t, double> joint;
    std::unordered_map<std::size_t, double> parent_counts;
    for (std::size_t r = 0; r < dataset.rows(); ++r) {
      const auto row = dataset.row(r);
      const std::size_t cfg = Configuration(row, parents, schema);
      joint[cfg * domain + row[child]] += 1;
      parent_counts[cfg] += 1;
      child_counts[row[child]] += 1;
    }
    for (const auto& [k, v] : joint) h_joint -= PLogP(v, n);
    for (const auto& [k, v] : parent_counts) h_parent -= PLogP(v, n);
  }
  double h_child = 0.0;
  for (double v : child_counts) h_child -= PLogP(v, n);
  return std::max(h_child + h_parent - h_joint, 0.0);
}

double MutualInformationSensitivity(std::size_t n) {
  if (n < 2) throw InvalidArgumentError("need at least two records");
  const double nn = static_cast<double>(n);
  return 2.0 / nn * std::log2((nn + 1.0) / 2.0) +
         (nn - 1.0) / nn * std::log2((nn + 1.0) / (nn - 1.0));
}

bool NetworkStructure::IsAcyclic() const {
  std::vector<int> position(parents.size(), -1);
  for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = static_cast<int>(i);
  for (std::size_t c = 0; c < parents.size(); ++c) {
    if (position[c] < 0) return false;
    for (int p : parents[c]) {
      if (position[p] < 0 || position[p] >= position[c]) return false;
    }
  }
  return true;
}

int NetworkStructure::MaxInDegree() const {
  std::size_t m = 0;
  for (const auto& p : parents) m = std::max(m, p.size());
  return static_cast<int>(m);
}

NetworkStructure BuildNetwork(const TabularDataset& dataset, int degree,
                              double epsilon_structure, Rng& rng,
                              std::optional<double> utility_sensitivity) {
  const int d = static_cast<int>(dataset.cols());
  if (d < 2) {
    throw InvalidArgumentError(
        "a network needs at least two columns; nothing to select");
  }
  if (degree < 1) throw InvalidArgumentError("degree must be at least 1");
  if (!(epsilon_structure > 0.0)) {
    throw InvalidArgumentError("structure epsilon must be positive");
  }
  const double sensitivity = utility_sensitivity.value_or(
      MutualInformationSensitivity(dataset.rows()));
  const double step_epsilon =
      std::isinf(epsilon_structure) ? epsilon_structure
                                    : epsilon_structure / (d - 1);

  NetworkStructure s;
  s.parents.assign(d, {});
  std::vector<bool> placed(d, false);
  const int first = static_cast<int>(rng.UniformIndex(d));
  s.order.push_back(first);
  placed[first] = true;

  struct Candidate {
    int child;
    std::vector<int> parents;
  };
  while (static_cast<int>(s.order.size()) < d) {
    std::vector<int> chosen = s.order;
    std::sort(chosen.begin(), chosen.end());
    const int k = std::min<int>(degree, static_cast<int>(chosen.size()));
    std::vector<Candidate> candidates;
    std::vector<double> utilities;
    for (int child = 0; child < d; ++child) {
      if (placed[child]) continue;
      ForEachSubset(chosen, k, [&](const std::vector<int>& subset) {
        candidates.push_back({child, subset});
        utilities.push_back(ColumnMutualInformation(dataset, child, subset));
      });
    }
    const std::size_t pick =
        dp::ExponentialMechanism(utilities, sensitivity, step_epsilon, rng);
    const Candidate& c = candidates[pick];
    s.order.push_back(c.child);
    s.parents[c.child] = c.parents;
    placed[c.child] = true;
  }
  return s;
}

std::size_t ConditionalTable::ConfigurationOf(
    std::span<const std::int32_t> row) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    idx = idx * static_cast<std::size_t>(parent_domains[i]) +
          static_cast<std::size_t>(row[parents[i]]);
  }
  return idx;
}

std::vector<double> NormalizeClipped(std::span<const double> counts) {
  std::vector<double> out(counts.size());
  double total = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out[i] = std::max(counts[i], 0.0);
    total += out[i];
  }
  if (total <= 0.0) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
  } else {
    for (double& v : out) v /= total;
  }
  return out;
}

std::vector<ConditionalTable> EstimateCpds(const TabularDataset& dataset,
                                           const NetworkStructure& structure,
                                           double epsilon_params, Rng& rng) {
  const data::Schema& schema = dataset.schema();
  const std::size_t d = dataset.cols();
  if (structure.parents.size() != d || structure.order.size() != d ||
      !structure.IsAcyclic()) {
    throw InvalidArgumentError("structure does not fit the schema");
  }
  if (!(epsilon_params > 0.0)) {
    throw InvalidArgumentError("parameter epsilon must be positive");
  }
  const double table_epsilon =
      std::isinf(epsilon_params) ? epsilon_params
                                 : epsilon_params / static_cast<double>(d);
  std::vector<ConditionalTable> tables(d);
  for (int node : structure.order) {
    ConditionalTable& t = tables[node];
    t.node = node;
    t.domain = schema.DomainSize(node);
    t.parents = structure.parents[node];
    for (int p : t.parents) t.parent_domains.push_back(schema.DomainSize(p));
    const std::size_t configs = ConfigurationCount(schema, t.parents);
    std::vector<double> counts(configs * t.domain, 0.0);
    for (std::size_t r = 0; r < dataset.rows(); ++r) {
      const auto row = dataset.row(r);
      counts[t.ConfigurationOf(row) * t.domain + row[node]] += 1.0;
    }
    dp::AddLaplaceNoise(counts, 2.0, table_epsilon, rng);
    t.probabilities.resize(counts.size());
    for (std::size_t c = 0; c < configs; ++c) {
      const auto row = NormalizeClipped(
          std::span<const double>(counts).subspan(c * t.domain, t.domain));
      std::copy(row.begin(), row.end(), t.probabilities.begin() + c * t.domain);
    }
  }
  return tables;
}

BayesNetModel::BayesNetModel(std::shared_ptr<const data::Schema> schema,
                             NetworkStructure structure,
                             std::vector<ConditionalTable> tables,
                             BudgetSplit budget)
    : schema_(std::move(schema)),
      structure_(std::move(structure)),
      tables_(std::move(tables)),
      budget_(budget) {
  if (structure_.parents.size() != schema_->size() ||
      tables_.size() != schema_->size() || !structure_.IsAcyclic()) {
    throw InvalidArgumentError("network does not match the schema");
  }
  for (const ConditionalTable& t : tables_) {
    if (t.domain != schema_->DomainSize(t.node) ||
        t.probabilities.size() % t.domain != 0) {
      throw InvalidArgumentError("conditional table has the wrong shape");
    }
  }
}

data::TabularDataset BayesNetModel::Sample(std::size_t m, Rng& rng) const {
  if (m < 1) throw InvalidArgumentError("sample size must be at least 1");
  const std::size_t d = schema_->size();
  std::vector<std::int32_t> cells(m * d, 0);
  for (std::size_t r = 0; r < m; ++r) {
    std::span<std::int32_t> row(cells.data() + r * d, d);
    for (int node : structure_.order) {
      const ConditionalTable& t = tables_[node];
      const double* p = t.probabilities.data() + t.ConfigurationOf(row) * t.domain;
      const double u = rng.Uniform();
      double acc = 0.0;
      int value = t.domain - 1;
      for (int v = 0; v < t.domain; ++v) {
        acc += p[v];
        if (u < acc) {
          value = v;
          break;
        }
      }
      // Rounding can leave acc just below one; fall back to the last
      // category with positive mass.
      if (u >= acc) {
        while (value > 0 && p[value] <= 0.0) --value;
      }
      row[node] = value;
    }
  }
  return data::TabularDataset(schema_, std::move(cells),
                              data::Provenance::kSynthetic);
}

std::string BayesNetModel::ToJson() const {
  nlohmann::json j;
  j["format"] = "dpsynth.privbayes";
  j["version"] = 1;
  j["schema"] = nlohmann::json::parse(schema_->ToJson());
  j["order"] = structure_.order;
  j["parents"] = structure_.parents;
  nlohmann::json tables = nlohmann::json::array();
  for (const ConditionalTable& t : tables_) {
    tables.push_back({{"node", t.node},
                      {"parents", t.parents},
                      {"probabilities", t.probabilities}});
  }
  j["tables"] = std::move(tables);
  j["budget"] = {{"total", FormatDouble(budget_.total)},
                 {"structure", FormatDouble(budget_.structure)},
                 {"parameters", FormatDouble(budget_.parameters)}};
  return j.dump();
}

BayesNetModel BayesNetModel::FromJson(std::string_view text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "dpsynth.privbayes") {
      throw InvalidArgumentError("not a dpsynth PrivBayes model");
    }
    auto schema = std::make_shared<const data::Schema>(
        data::Schema::FromJson(j.at("schema").dump()));
    NetworkStructure s;
    s.order = j.at("order").get<std::vector<int>>();
    s.parents = j.at("parents").get<std::vector<std::vector<int>>>();
    std::vector<ConditionalTable> tables(schema->size());
    for (const auto& jt : j.at("tables")) {
      const int node = jt.at("node").get<int>();
      if (node < 0 || node >= static_cast<int>(schema->size())) {
        throw InvalidArgumentError("table node out of range");
      }
      ConditionalTable& t = tables[node];
      t.node = node;
      t.domain = schema->DomainSize(node);
      t.parents = jt.at("parents").get<std::vector<int>>();
      for (int p : t.parents) t.parent_domains.push_back(schema->DomainSize(p));
      t.probabilities = jt.at("probabilities").get<std::vector<double>>();
    }
    BudgetSplit b;
    b.total = ParseDouble(j.at("budget").at("total").get<std::string>());
    b.structure = ParseDouble(j.at("budget").at("structure").get<std::string>());
    b.parameters = ParseDouble(j.at("budget").at("parameters").get<std::string>());
    return BayesNetModel(std::move(schema), std::move(s), std::move(tables), b);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgumentError(std::string("malformed PrivBayes JSON: ") +
                               e.what());
  }
}

BayesNetModel Fit(const TabularDataset& dataset, const PrivBayesConfig& config,
                  Rng& rng) {
  if (!(config.epsilon > 0.0)) {
    throw InvalidArgumentError("epsilon must be positive");
  }
  if (!(config.structure_fraction > 0.0 && config.structure_fraction < 1.0)) {
    throw InvalidArgumentError("structure_fraction must be in (0, 1)");
  }
  BudgetSplit budget;
  budget.total = config.epsilon;
  NetworkStructure structure;
  if (dataset.cols() == 1) {
    // Nothing to learn structurally; all of the budget goes to the marginal.
    structure.order = {0};
    structure.parents = {{}};
    budget.structure = 0.0;
    budget.parameters = config.epsilon;
  } else {
    if (std::isinf(config.epsilon)) {
      budget.structure = config.epsilon;
      budget.parameters = config.epsilon;
    } else {
      budget.structure = config.epsilon * config.structure_fraction;
      budget.parameters = config.epsilon - budget.structure;
    }
    structure = BuildNetwork(dataset, config.degree, budget.structure, rng,
                             config.utility_sensitivity);
  }
  auto tables = EstimateCpds(dataset, structure, budget.parameters, rng);
  return BayesNetModel(dataset.schema_ptr(), std::move(structure),
                       std::move(tables), budget);
}

}  // namespace dpsynth::privbayes
