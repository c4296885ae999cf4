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
// Pieces shared by the two GAN synthesizers: the one-hot record encoding,
// the trained generator wrapper and the training log.
#ifndef DPSYNTH_GAN_H_
#define DPSYNTH_GAN_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsynth/data.h"
#include "dpsynth/nn.h"
#include "dpsynth/rng.h"

namespace dpsynth::gan {

// Every column becomes one block of DomainSize(column) indicator columns.
class OneHotEncoder {
 public:
  explicit OneHotEncoder(std::shared_ptr<const data::Schema> schema);

  const data::Schema& schema() const { return *schema_; }
  const std::shared_ptr<const data::Schema>& schema_ptr() const {
    return schema_;
  }
  int width() const { return width_; }
  const std::vector<int>& block_sizes() const { return block_sizes_; }
  const std::vector<int>& offsets() const { return offsets_; }

  nn::Matrix Encode(const data::TabularDataset& dataset) const;
  nn::Matrix Encode(const data::TabularDataset& dataset,
                    std::span<const std::size_t> rows) const;

  // Draws one category per block from `probabilities` (rows sum to one
  // within each block).
  data::TabularDataset Sample(const nn::Matrix& probabilities, Rng& rng,
                              data::Provenance provenance =
                                  data::Provenance::kSynthetic) const;

 private:
  std::shared_ptr<const data::Schema> schema_;
  std::vector<int> block_sizes_;
  std::vector<int> offsets_;
  int width_ = 0;
};

struct Architecture {
  int noise_dim = 32;
  std::vector<int> generator_hidden = {64, 64};
  std::vector<int> discriminator_hidden = {64, 64};
};

// Generator: relu hidden layers and an identity output whose blocks go
// through a softmax.
nn::Mlp CreateGenerator(const Architecture& arch, int output_dim, Rng& rng);
// Discriminator or critic: leaky-relu hidden layers, one output unit with
// the given activation.
nn::Mlp CreateDiscriminator(const Architecture& arch, int input_dim,
                            nn::Activation output, Rng& rng);

nn::Matrix SampleNoise(std::size_t rows, int dim, Rng& rng);

// Forward pass of a generator up to the block-softmax probabilities.
struct GeneratorPass {
  nn::ForwardCache cache;
  nn::Matrix probabilities;
  double temperature = 1.0;
};
GeneratorPass RunGenerator(const nn::Mlp& generator, const nn::Matrix& noise,
                           std::span<const int> block_sizes);
// Gumbel-softmax relaxation: each block is softmax((logits + g) / temperature)
// with standard Gumbel g, a near one-hot draw from the block's categorical
// distribution for small temperatures. temperature <= 0 falls back to the
// plain softmax.
GeneratorPass RunGenerator(const nn::Mlp& generator, const nn::Matrix& noise,
                           std::span<const int> block_sizes, double temperature,
                           Rng& rng);
// Gradient of a loss with respect to the generator parameters, given the
// loss gradient with respect to the probabilities of `pass`.
nn::Vector GeneratorGradient(const nn::Mlp& generator, const GeneratorPass& pass,
                             const nn::Matrix& prob_grad,
                             std::span<const int> block_sizes);

struct TrainingLogEntry {
  std::int64_t iteration = 0;
  double discriminator_loss = 0.0;
  double generator_loss = 0.0;
  double epsilon_spent = 0.0;
};

void WriteTrainingLog(const std::vector<TrainingLogEntry>& log,
                      std::ostream& out);

struct TrainingSummary {
  std::string model;  // "dpwgan" or "pategan"
  double epsilon_target = 0.0;
  double delta = 0.0;
  double epsilon_spent = 0.0;
  std::int64_t generator_steps = 0;
  std::int64_t discriminator_steps = 0;
  // Privacy-charged operations: critic batches or labelled queries.
  std::int64_t private_steps = 0;
  // The budget did not allow a single private step, so the generator is the
  // untrained initialization.
  bool degenerate = false;
  // Set when some student-side network consumed real rows.
  bool student_saw_real_rows = false;
  std::string accountant_json;
};

class GanModel {
 public:
  GanModel(std::shared_ptr<const data::Schema> schema, nn::Mlp generator,
           int noise_dim, TrainingSummary summary);

  const data::Schema& schema() const { return encoder_.schema(); }
  const nn::Mlp& generator() const { return generator_; }
  int noise_dim() const { return noise_dim_; }
  const TrainingSummary& summary() const { return summary_; }
  bool degenerate() const { return summary_.degenerate; }

  // Throws InvalidArgumentError for m == 0.
  data::TabularDataset Generate(std::size_t m, Rng& rng) const;

  std::string ToJson() const;
  static GanModel FromJson(std::string_view text);

 private:
  OneHotEncoder encoder_;
  nn::Mlp generator_;
  int noise_dim_;
  TrainingSummary summary_;
};

// Uniform mini-batch of `size` distinct indices out of [0, n).
std::vector<std::size_t> SampleBatch(std::size_t n, std::size_t size, Rng& rng);

}  // namespace dpsynth::gan

#endif  // DPSYNTH_GAN_H_
