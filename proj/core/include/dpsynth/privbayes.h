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
// Differentially private Bayesian-network synthesizer.
//
// Fitting runs in two epsilon-DP phases. Structure learning greedily adds
// one (child, parent set) pair per step, chosen with the exponential
// mechanism scored by mutual information. Parameter learning materializes a
// joint count table per node, perturbs it with Laplace noise, clips negative
// counts to zero and normalizes each parent configuration. Clipping is what
// pushes small cells up and flattens imbalanced conditionals.
#ifndef DPSYNTH_PRIVBAYES_H_
#define DPSYNTH_PRIVBAYES_H_

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsynth/data.h"
#include "dpsynth/rng.h"

namespace dpsynth::privbayes {

// Dense rows x cols table of non-negative counts, row-major.
struct ContingencyTable {
  int rows = 0;
  int cols = 0;
  std::vector<double> counts;

  double at(int r, int c) const { return counts[r * cols + c]; }
};

// Mutual information (bits) of the empirical joint distribution. Throws
// InvalidArgumentError for negative entries or a zero total.
double MutualInformation(const ContingencyTable& table);

// Mutual information (bits) between a column and the joint configuration of
// `parents`, computed from the rows of `dataset`.
double ColumnMutualInformation(const data::TabularDataset& dataset, int child,
                               std::span<const int> parents);

// Global sensitivity (bits) of empirical mutual information on n records,
// for the case where neither variable is binary.
double MutualInformationSensitivity(std::size_t n);

struct NetworkStructure {
  // Columns in the order they were added; parents precede children.
  std::vector<int> order;
  // parents[column] lists that column's parents.
  std::vector<std::vector<int>> parents;

  bool IsAcyclic() const;
  int MaxInDegree() const;
};

// Greedy construction with `degree`-bounded parent sets. The first node is
// uniform at random; each later step spends epsilon_structure / (d - 1).
// Throws InvalidArgumentError for a single-column dataset or degree < 1.
NetworkStructure BuildNetwork(
    const data::TabularDataset& dataset, int degree, double epsilon_structure,
    Rng& rng, std::optional<double> utility_sensitivity = std::nullopt);

struct ConditionalTable {
  int node = 0;
  int domain = 0;
  std::vector<int> parents;
  std::vector<int> parent_domains;
  // Row-major: parent configuration x node value. Every row sums to one.
  std::vector<double> probabilities;

  std::size_t parent_configurations() const {
    return probabilities.size() / static_cast<std::size_t>(domain);
  }
  // Mixed-radix index of a parent assignment taken from a full row.
  std::size_t ConfigurationOf(std::span<const std::int32_t> row) const;
};

// Noisy conditional tables, one per column. Each of the d tables receives
// epsilon_params / d; a replaced record moves two cells of every table by
// one, so the per-table Laplace scale on counts is 2d / epsilon_params.
std::vector<ConditionalTable> EstimateCpds(const data::TabularDataset& dataset,
                                           const NetworkStructure& structure,
                                           double epsilon_params, Rng& rng);

// Clip-at-zero normalization of a (possibly noisy) count row. An all-zero
// row becomes uniform.
std::vector<double> NormalizeClipped(std::span<const double> counts);

struct PrivBayesConfig {
  int degree = 3;
  double epsilon = std::numeric_limits<double>::infinity();
  // Fraction of epsilon spent on structure learning.
  double structure_fraction = 0.5;
  // Overrides MutualInformationSensitivity(n).
  std::optional<double> utility_sensitivity;
};

struct BudgetSplit {
  double total = 0.0;
  double structure = 0.0;
  double parameters = 0.0;
};

class BayesNetModel {
 public:
  BayesNetModel(std::shared_ptr<const data::Schema> schema,
                NetworkStructure structure,
                std::vector<ConditionalTable> tables, BudgetSplit budget);

  const data::Schema& schema() const { return *schema_; }
  const NetworkStructure& structure() const { return structure_; }
  const std::vector<ConditionalTable>& tables() const { return tables_; }
  const BudgetSplit& budget() const { return budget_; }

  // Ancestral sampling of m rows (m >= 1).
  data::TabularDataset Sample(std::size_t m, Rng& rng) const;

  std::string ToJson() const;
  static BayesNetModel FromJson(std::string_view text);

 private:
  std::shared_ptr<const data::Schema> schema_;
  NetworkStructure structure_;
  std::vector<ConditionalTable> tables_;  // indexed by column
  BudgetSplit budget_;
};

BayesNetModel Fit(const data::TabularDataset& dataset,
                  const PrivBayesConfig& config, Rng& rng);

}  // namespace dpsynth::privbayes

#endif  // DPSYNTH_PRIVBAYES_H_
