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
// Wasserstein GAN whose critic is trained with DP-SGD. Only the critic reads
// real rows, so only critic updates are charged to the accountant; generator
// updates are post-processing.
#ifndef DPSYNTH_DPWGAN_H_
#define DPSYNTH_DPWGAN_H_

#include <cstdint>
#include <vector>

#include "dpsynth/data.h"
#include "dpsynth/gan.h"
#include "dpsynth/mechanisms.h"
#include "dpsynth/nn.h"
#include "dpsynth/rng.h"

namespace dpsynth::dpwgan {

struct DpWganConfig {
  gan::Architecture architecture;
  double critic_clip = 0.01;
  double critic_learning_rate = 1e-3;
  double generator_learning_rate = 1e-3;
  int batch_size = 64;
  double clip_norm = 0.01;
  double noise_multiplier = 3.0;
  int critic_steps = 5;
  // Generator samples reach the discriminators through a Gumbel-softmax with
  // this temperature; 0 feeds the plain block-softmax probabilities.
  double gumbel_temperature = 0.0;
  // Generator iterations.
  std::int64_t max_iterations = 2000;
  dp::PrivacyBudget budget = dp::PrivacyBudget::Approximate(dp::kInfinity);
  // Every this many generator iterations a log entry is recorded.
  int log_every = 50;

  // Throws InvalidArgumentError when a field is out of range.
  void Validate() const;
};

struct TrainResult {
  gan::GanModel model;
  std::vector<gan::TrainingLogEntry> log;
};

// Largest number of subsampled-Gaussian steps whose composition stays within
// (epsilon, delta). Infinite epsilon yields `limit`.
std::int64_t MaxPrivateSteps(double sampling_rate, double noise_multiplier,
                             const dp::PrivacyBudget& budget,
                             std::int64_t limit);

// Averaged gradient of mean(critic(fake)) - mean(critic(real)) over the
// paired batch. With `clip_norm` finite each pair's gradient is clipped
// first; with `noise_multiplier` > 0 Gaussian noise of standard deviation
// noise_multiplier * clip_norm is added to the sum before averaging.
nn::Vector CriticGradient(const nn::Mlp& critic, const nn::Matrix& real,
                          const nn::Matrix& fake, double clip_norm,
                          double noise_multiplier, Rng& rng,
                          double* loss = nullptr);

TrainResult Train(const data::TabularDataset& dataset,
                  const DpWganConfig& config, Rng& rng);

}  // namespace dpsynth::dpwgan

#endif  // DPSYNTH_DPWGAN_H_
