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
#include "dpsynth/dpwgan.h"

#include <algorithm>
#include <cmath>

#include "dpsynth/accountant.h"
#include "dpsynth/errors.h"

namespace dpsynth::dpwgan {

void DpWganConfig::Validate() const {
  budget.Validate();
  if (!budget.IsInfinite() && !(budget.delta > 0.0)) {
    throw InvalidArgumentError("a finite DP-WGAN budget needs delta > 0");
  }
  if (!(critic_clip > 0.0)) throw InvalidArgumentError("critic_clip must be positive");
  if (!(critic_learning_rate > 0.0) || !(generator_learning_rate > 0.0)) {
    throw InvalidArgumentError("learning rates must be positive");
  }
  if (batch_size < 1) throw InvalidArgumentError("batch_size must be positive");
  if (!(clip_norm > 0.0)) throw InvalidArgumentError("clip_norm must be positive");
  if (!(noise_multiplier > 0.0) || std::isinf(noise_multiplier)) {
    throw InvalidArgumentError("noise_multiplier must be positive and finite");
  }
  if (critic_steps < 1) throw InvalidArgumentError("critic_steps must be positive");
  if (max_iterations < 0) throw InvalidArgumentError("max_iterations must be >= 0");
  if (log_every < 1) throw InvalidArgumentError("log_every must be positive");
  if (architecture.noise_dim < 1) throw InvalidArgumentError("noise_dim must be positive");
}

std::int64_t MaxPrivateSteps(double sampling_rate, double noise_multiplier,
                             const dp::PrivacyBudget& budget,
                             std::int64_t limit) {
  if (budget.IsInfinite()) return limit;
  auto fits = [&](std::int64_t steps) {
    dp::Accountant a;
    a.AddSubsampledGaussian(sampling_rate, noise_multiplier, steps);
    return a.EpsilonAt(budget.delta) <= budget.epsilon;
  };
  if (limit <= 0 || !fits(1)) return 0;
  if (fits(limit)) return limit;
  std::int64_t lo = 1;
  std::int64_t hi = limit;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (fits(mid) ? lo : hi) = mid;
  }
  return lo;
}

nn::Vector CriticGradient(const nn::Mlp& critic, const nn::Matrix& real,
                          const nn::Matrix& fake, double clip_norm,
                          double noise_multiplier, Rng& rng, double* loss) {
  if (real.rows() != fake.rows() || real.cols() != fake.cols() ||
      real.rows() < 1) {
    throw InvalidArgumentError("real and fake batches must have equal shape");
  }
  const Eigen::Index b = real.rows();
  nn::Matrix both(2 * b, real.cols());
  both << real, fake;
  const nn::ForwardCache cache = critic.Forward(both);
  if (loss != nullptr) {
    *loss = cache.output.bottomRows(b).mean() - cache.output.topRows(b).mean();
  }
  nn::Matrix out_grad(2 * b, 1);
  out_grad.topRows(b).setConstant(-1.0);
  out_grad.bottomRows(b).setConstant(1.0);
  const bool private_path = std::isfinite(clip_norm) || noise_multiplier > 0.0;
  if (!private_path) {
    return critic.Backward(cache, out_grad).total / static_cast<double>(b);
  }
  const nn::GradientSet g = critic.BackwardPerExample(cache, out_grad);
  // One record influences exactly one (real, fake) pair.
  nn::GradientSet pairs;
  pairs.per_example = g.per_example.topRows(b) + g.per_example.bottomRows(b);
  pairs.total = pairs.per_example.colwise().sum().transpose();
  nn::ClipPerExample(pairs, clip_norm);
  nn::Vector sum = pairs.total;
  if (noise_multiplier > 0.0) {
    const std::vector<double> noise = dp::GaussianNoise(
        static_cast<std::size_t>(sum.size()), noise_multiplier * clip_norm, rng);
    sum += Eigen::Map<const nn::Vector>(noise.data(), sum.size());
  }
  return sum / static_cast<double>(b);
}

TrainResult Train(const data::TabularDataset& dataset,
                  const DpWganConfig& config, Rng& rng) {
  config.Validate();
  const std::size_t n = dataset.rows();
  const std::size_t b = std::min<std::size_t>(config.batch_size, n);
  const bool private_run = !config.budget.IsInfinite();
  const double q = static_cast<double>(b) / static_cast<double>(n);

  const gan::OneHotEncoder encoder(dataset.schema_ptr());
  const nn::Matrix real = encoder.Encode(dataset);
  const auto& blocks = encoder.block_sizes();
  nn::Mlp generator =
      gan::CreateGenerator(config.architecture, encoder.width(), rng);
  nn::Mlp critic = gan::CreateDiscriminator(config.architecture, encoder.width(),
                                            nn::Activation::kIdentity, rng);
  critic.ClipWeights(config.critic_clip);

  const std::int64_t limit = config.max_iterations * config.critic_steps;
  const std::int64_t budgeted =
      private_run ? MaxPrivateSteps(q, config.noise_multiplier, config.budget,
                                    limit)
                  : limit;
  const double clip = private_run ? config.clip_norm : dp::kInfinity;
  const double sigma = private_run ? config.noise_multiplier : 0.0;

  nn::Adam critic_opt({.learning_rate = config.critic_learning_rate, .beta1 = 0.5});
  nn::Adam generator_opt(
      {.learning_rate = config.generator_learning_rate, .beta1 = 0.5});
  dp::Accountant accountant;
  std::vector<gan::TrainingLogEntry> log;
  std::int64_t critic_updates = 0;
  // Critic steps not yet folded into the accountant; composition is linear
  // in the step count, so steps are charged in bulk.
  std::int64_t pending = 0;
  auto charge = [&] {
    if (private_run) accountant.AddSubsampledGaussian(q, sigma, pending);
    pending = 0;
  };
  const double delta =
      config.budget.delta > 0.0 ? config.budget.delta : dp::kDefaultGanDelta;
  std::int64_t iteration = 0;
  while (iteration < config.max_iterations) {
    double critic_loss = 0.0;
    int done = 0;
    for (int s = 0; s < config.critic_steps && critic_updates < budgeted; ++s) {
      const auto idx = gan::SampleBatch(n, b, rng);
      nn::Matrix real_batch(static_cast<Eigen::Index>(b), encoder.width());
      for (std::size_t i = 0; i < b; ++i) {
        real_batch.row(static_cast<Eigen::Index>(i)) =
            real.row(static_cast<Eigen::Index>(idx[i]));
      }
      const nn::Matrix fake =
          gan::RunGenerator(generator,
                            gan::SampleNoise(b, config.architecture.noise_dim, rng),
                            blocks, config.gumbel_temperature, rng)
              .probabilities;
      const nn::Vector grad =
          CriticGradient(critic, real_batch, fake, clip, sigma, rng, &critic_loss);
      critic_opt.Step(critic, grad);
      critic.ClipWeights(config.critic_clip);
      ++critic_updates;
      ++pending;
      ++done;
    }
    if (done == 0) break;

    const gan::GeneratorPass pass = gan::RunGenerator(
        generator, gan::SampleNoise(b, config.architecture.noise_dim, rng),
        blocks, config.gumbel_temperature, rng);
    const nn::ForwardCache cache = critic.Forward(pass.probabilities);
    const double generator_loss = -cache.output.mean();
    const nn::Matrix out_grad = nn::Matrix::Constant(
        static_cast<Eigen::Index>(b), 1, -1.0 / static_cast<double>(b));
    const nn::Matrix input_grad = critic.Backward(cache, out_grad).input;
    generator_opt.Step(generator, gan::GeneratorGradient(generator, pass,
                                                         input_grad, blocks));
    ++iteration;
    if (iteration % config.log_every == 0 || iteration == config.max_iterations) {
      charge();
      log.push_back({iteration, critic_loss, generator_loss,
                     accountant.EpsilonAt(delta)});
    }
  }

  gan::TrainingSummary summary;
  summary.model = "dpwgan";
  summary.epsilon_target = config.budget.epsilon;
  summary.delta = config.budget.delta;
  charge();
  summary.epsilon_spent = accountant.EpsilonAt(delta);
  summary.generator_steps = iteration;
  summary.discriminator_steps = critic_updates;
  summary.private_steps = private_run ? critic_updates : 0;
  summary.degenerate = critic_updates == 0;
  summary.accountant_json = accountant.ToJson();
  return {gan::GanModel(dataset.schema_ptr(), std::move(generator),
                        config.architecture.noise_dim, std::move(summary)),
          std::move(log)};
}

}  // namespace dpsynth::dpwgan
