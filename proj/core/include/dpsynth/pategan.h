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
// GAN trained through a teacher ensemble. Teachers see disjoint partitions
// of the real rows; a student discriminator only ever sees generator output,
// labelled by a Laplace-noised teacher vote, and the generator learns from
// the student alone.
#ifndef DPSYNTH_PATEGAN_H_
#define DPSYNTH_PATEGAN_H_

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dpsynth/data.h"
#include "dpsynth/gan.h"
#include "dpsynth/mechanisms.h"
#include "dpsynth/rng.h"

namespace dpsynth::pategan {

// Changing one record changes one teacher's vote, which moves two counts.
inline constexpr double kVoteSensitivity = 2.0;

struct PateGanConfig {
  gan::Architecture architecture;
  int teachers = 10;
  // Laplace scale added to each vote count. When unset it is calibrated so
  // that exactly `target_queries` labelled samples fit the budget; 0 plans
  // for every query of the full schedule.
  std::optional<double> vote_scale;
  std::int64_t target_queries = 0;
  double generator_learning_rate = 1e-4;
  double teacher_learning_rate = 1e-3;
  double student_learning_rate = 1e-3;
  int batch_size = 64;
  int teacher_steps = 1;
  int student_steps = 1;
  // Generator samples reach the discriminators through a Gumbel-softmax with
  // this temperature; 0 feeds the plain block-softmax probabilities.
  double gumbel_temperature = 0.2;
  std::int64_t max_iterations = 1000;
  dp::PrivacyBudget budget = dp::PrivacyBudget::Approximate(dp::kInfinity);
  int log_every = 50;

  void Validate() const;
};

struct TrainResult {
  gan::GanModel model;
  std::vector<gan::TrainingLogEntry> log;
  double vote_scale = 0.0;
};

// k disjoint parts of a seeded shuffle; sizes differ by at most one. Throws
// InvalidArgumentError when k > n or k < 1.
std::vector<data::TabularDataset> Partition(const data::TabularDataset& dataset,
                                            int k, Rng& rng);

// argmax over {count0 + Lap(scale), count1 + Lap(scale)}. A zero scale is
// the noiseless vote, with ties broken uniformly.
int NoisyVote(std::span<const int> votes, double scale, Rng& rng);

// Largest number of labelled queries with Laplace scale `scale` that fits
// the budget, capped at `limit`.
std::int64_t MaxQueries(double scale, const dp::PrivacyBudget& budget,
                        std::int64_t limit);

// Smallest scale (to relative precision 1e-9) at which `queries` labelled
// queries fit the budget. Zero for an infinite budget.
double CalibrateVoteScale(std::int64_t queries, const dp::PrivacyBudget& budget);

TrainResult Train(const data::TabularDataset& dataset,
                  const PateGanConfig& config, Rng& rng);

}  // namespace dpsynth::pategan

#endif  // DPSYNTH_PATEGAN_H_
