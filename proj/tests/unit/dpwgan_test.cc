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

#include <gtest/gtest.h>

#include "dpsynth/accountant.h"
#include "dpsynth/desk.h"
#include "dpsynth/errors.h"
#include "oracles/oracles.h"

namespace dpsynth::dpwgan {
namespace {

DpWganConfig Small() {
  DpWganConfig c;
  c.architecture.noise_dim = 8;
  c.architecture.generator_hidden = {16};
  c.architecture.discriminator_hidden = {16};
  c.batch_size = 32;
  c.max_iterations = 40;
  c.log_every = 10;
  return c;
}

TEST(CriticGradientTest, NonPrivateMatchesFiniteDifference) {
  Rng rng(1);
  const std::vector<int> dims = {5, 4, 1};
  const std::vector<nn::Activation> acts = {nn::Activation::kTanh,
                                            nn::Activation::kIdentity};
  const nn::Mlp critic = nn::Mlp::Create(dims, acts, rng);
  const nn::Matrix real = nn::Matrix::Random(6, 5);
  const nn::Matrix fake = nn::Matrix::Random(6, 5);
  const auto loss = [&](const std::vector<double>& p) {
    nn::Mlp c = critic;
    c.SetParameters(Eigen::Map<const nn::Vector>(p.data(), p.size()));
    return c.Predict(fake).mean() - c.Predict(real).mean();
  };
  const nn::Vector p = critic.Parameters();
  const auto fd = oracle::FiniteDifference(
      loss, std::vector<double>(p.data(), p.data() + p.size()), 1e-6);
  double value = 0.0;
  const nn::Vector g =
      CriticGradient(critic, real, fake, dp::kInfinity, 0.0, rng, &value);
  for (Eigen::Index i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], fd[i], 1e-7);
  EXPECT_NEAR(value, loss(std::vector<double>(p.data(), p.data() + p.size())), 1e-12);
  EXPECT_EQ(rng.counters().Total(), 0);
}

TEST(CriticGradientTest, ClippingBoundsEachPairContribution) {
  Rng rng(2);
  const std::vector<int> dims = {5, 4, 1};
  const std::vector<nn::Activation> acts = {nn::Activation::kRelu,
                                            nn::Activation::kIdentity};
  const nn::Mlp critic = nn::Mlp::Create(dims, acts, rng);
  const nn::Matrix real = 10 * nn::Matrix::Random(8, 5);
  const nn::Matrix fake = 10 * nn::Matrix::Random(8, 5);
  // Without noise the average of clipped pair gradients has norm <= C.
  const nn::Vector g = CriticGradient(critic, real, fake, 0.01, 0.0, rng);
  EXPECT_LE(g.norm(), 0.01 + 1e-12);
  const nn::Vector noisy = CriticGradient(critic, real, fake, 0.01, 3.0, rng);
  EXPECT_EQ(rng.counters().gaussian_calls, 1);
  EXPECT_GT((noisy - g).norm(), 0.0);
  EXPECT_THROW(CriticGradient(critic, real, fake.topRows(3), 1.0, 0.0, rng),
               InvalidArgumentError);
}

TEST(MaxPrivateStepsTest, LargestStepCountWithinBudget) {
  const auto budget = dp::PrivacyBudget::Approximate(2.0, 1e-5);
  const std::int64_t steps = MaxPrivateSteps(0.01, 1.1, budget, 1000000);
  ASSERT_GT(steps, 0);
  dp::Accountant at;
  at.AddSubsampledGaussian(0.01, 1.1, steps);
  EXPECT_LE(at.EpsilonAt(1e-5), 2.0);
  dp::Accountant over;
  over.AddSubsampledGaussian(0.01, 1.1, steps + 1);
  EXPECT_GT(over.EpsilonAt(1e-5), 2.0);
  EXPECT_EQ(MaxPrivateSteps(0.01, 1.1, dp::PrivacyBudget::Approximate(dp::kInfinity), 77), 77);
  EXPECT_EQ(MaxPrivateSteps(0.5, 0.5, dp::PrivacyBudget::Approximate(1e-3, 1e-5), 100), 0);
}

TEST(TrainTest, NonPrivateRunUsesNoMechanism) {
  const data::TabularDataset d = desk::Generate(3, 400, 80);
  Rng rng(3);
  const TrainResult r = Train(d, Small(), rng);
  EXPECT_EQ(rng.counters().Total(), 0);
  EXPECT_EQ(r.model.summary().generator_steps, 40);
  EXPECT_EQ(r.model.summary().discriminator_steps, 200);
  EXPECT_EQ(r.model.summary().private_steps, 0);
  EXPECT_FALSE(r.model.degenerate());
  EXPECT_EQ(r.log.size(), 4u);
}

TEST(TrainTest, PrivateRunStaysWithinBudget) {
  const data::TabularDataset d = desk::Generate(3, 400, 80);
  DpWganConfig c = Small();
  c.budget = dp::PrivacyBudget::Approximate(1.0, 1e-5);
  Rng rng(4);
  const TrainResult r = Train(d, c, rng);
  EXPECT_GT(r.model.summary().private_steps, 0);
  EXPECT_LE(r.model.summary().epsilon_spent, 1.0);
  EXPECT_GT(rng.counters().gaussian_calls, 0);
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    EXPECT_GE(r.log[i].epsilon_spent, r.log[i - 1].epsilon_spent);
  }
}

TEST(TrainTest, TinyBudgetIsDegenerate) {
  const data::TabularDataset d = desk::Generate(3, 400, 80);
  DpWganConfig c = Small();
  c.budget = dp::PrivacyBudget::Approximate(0.01, 1e-5);
  c.noise_multiplier = 0.5;
  Rng rng(5);
  const TrainResult r = Train(d, c, rng);
  EXPECT_TRUE(r.model.degenerate());
  EXPECT_EQ(r.model.summary().epsilon_spent, 0.0);
  EXPECT_EQ(r.model.summary().generator_steps, 0);
}

TEST(TrainTest, SameSeedSameModel) {
  const data::TabularDataset d = desk::Generate(3, 400, 80);
  DpWganConfig c = Small();
  c.budget = dp::PrivacyBudget::Approximate(5.0, 1e-5);
  Rng a(6);
  Rng b(6);
  EXPECT_EQ(Train(d, c, a).model.ToJson(), Train(d, c, b).model.ToJson());
}

TEST(ConfigTest, Validate) {
  DpWganConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.budget = {1.0, 0.0};
  EXPECT_THROW(c.Validate(), InvalidArgumentError);
  c = DpWganConfig{};
  c.clip_norm = 0.0;
  EXPECT_THROW(c.Validate(), InvalidArgumentError);
  c = DpWganConfig{};
  c.critic_steps = 0;
  EXPECT_THROW(c.Validate(), InvalidArgumentError);
  c = DpWganConfig{};
  c.noise_multiplier = dp::kInfinity;
  EXPECT_THROW(c.Validate(), InvalidArgumentError);
}

}  // namespace
}  // namespace dpsynth::dpwgan
