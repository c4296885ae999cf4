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
#include "dpsynth/mechanisms.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "dpsynth/errors.h"
#include "oracles/oracles.h"

namespace dpsynth::dp {
namespace {

TEST(LaplaceTest, ScaleIsSensitivityOverEpsilon) {
  EXPECT_DOUBLE_EQ(LaplaceScale(2.0, 0.5), 4.0);
  EXPECT_EQ(LaplaceScale(1.0, kInfinity), 0.0);
  EXPECT_THROW(LaplaceScale(1.0, 0.0), InvalidArgumentError);
  EXPECT_THROW(LaplaceScale(1.0, -1.0), InvalidArgumentError);
  EXPECT_THROW(LaplaceScale(0.0, 1.0), InvalidArgumentError);
  EXPECT_THROW(LaplaceScale(kInfinity, 1.0), InvalidArgumentError);
}

TEST(LaplaceTest, MomentsMatch) {
  Rng rng(11);
  const double b = 3.0;
  const int n = 200000;
  double sum = 0.0;
  double sq = 0.0;
  double abs_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = SampleLaplace(b, rng);
    sum += x;
    sq += x * x;
    abs_sum += std::abs(x);
  }
  EXPECT_NEAR(sum / n, 0.0, 0.05);
  EXPECT_NEAR(sq / n, 2 * b * b, 0.05 * 2 * b * b);
  EXPECT_NEAR(abs_sum / n, b, 0.02 * b);
}

TEST(LaplaceTest, InfiniteEpsilonPassesThroughWithoutNoise) {
  Rng rng(3);
  const std::vector<double> v = {1.0, 2.0, 3.0};
  EXPECT_EQ(LaplaceMechanism(v, 1.0, kInfinity, rng), v);
  EXPECT_EQ(rng.counters().Total(), 0);
  const auto noisy = LaplaceMechanism(v, 1.0, 1.0, rng);
  EXPECT_NE(noisy, v);
  EXPECT_EQ(rng.counters().laplace_calls, 1);
}

TEST(GaussianTest, RejectsBadSigma) {
  Rng rng(3);
  EXPECT_THROW(GaussianNoise(3, 0.0, rng), InvalidArgumentError);
  EXPECT_THROW(GaussianNoise(3, kInfinity, rng), InvalidArgumentError);
  EXPECT_EQ(GaussianNoise(5, 2.0, rng).size(), 5u);
}

TEST(ExponentialMechanismTest, FrequenciesMatchAnalytic) {
  Rng rng(5);
  const std::vector<double> u = {0.0, 1.0, 2.0, 4.0};
  const double epsilon = 1.0;
  const double sensitivity = 1.0;
  std::vector<double> p(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    p[i] = std::exp(epsilon * u[i] / (2 * sensitivity));
  }
  const double z = std::accumulate(p.begin(), p.end(), 0.0);
  std::vector<int> hits(u.size(), 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++hits[ExponentialMechanism(u, sensitivity, epsilon, rng)];
  for (std::size_t i = 0; i < u.size(); ++i) {
    EXPECT_NEAR(static_cast<double>(hits[i]) / n, p[i] / z, 0.005) << i;
  }
}

TEST(ExponentialMechanismTest, InfiniteEpsilonIsArgmaxWithRandomTies) {
  Rng rng(5);
  const std::vector<double> u = {1.0, 3.0, 3.0, 2.0};
  int first = 0;
  for (int i = 0; i < 2000; ++i) {
    const std::size_t pick = ExponentialMechanism(u, 1.0, kInfinity, rng);
    ASSERT_TRUE(pick == 1 || pick == 2);
    first += pick == 1;
  }
  EXPECT_GT(first, 800);
  EXPECT_LT(first, 1200);
  EXPECT_EQ(rng.counters().Total(), 0);
}

TEST(ExponentialMechanismTest, LargeUtilitiesDoNotOverflow) {
  Rng rng(9);
  const std::vector<double> u = {1e6, 1e6 + 1.0};
  const std::size_t pick = ExponentialMechanism(u, 1.0, 1.0, rng);
  EXPECT_LT(pick, 2u);
}

TEST(ExponentialMechanismTest, CandidateOverload) {
  Rng rng(9);
  const std::vector<std::string> names = {"a", "b"};
  const std::vector<double> u = {0.0, 1.0};
  EXPECT_EQ(ExponentialMechanism<std::string>(names, u, 1.0, kInfinity, rng), "b");
  const std::vector<double> short_u = {0.0};
  EXPECT_THROW(ExponentialMechanism<std::string>(names, short_u, 1.0, 1.0, rng),
               InvalidArgumentError);
  EXPECT_THROW(ExponentialMechanism(std::span<const double>{}, 1.0, 1.0, rng),
               InvalidArgumentError);
}

// The noisy argmax between two counts matches the Laplace race integral.
TEST(LaplaceTest, NoisyComparisonMatchesRaceOracle) {
  Rng rng(21);
  const double b = 2.0;
  const double c1 = 1.0;
  const double c0 = 0.0;
  const int n = 200000;
  int wins = 0;
  for (int i = 0; i < n; ++i) {
    wins += c1 + SampleLaplace(b, rng) > c0 + SampleLaplace(b, rng);
  }
  EXPECT_NEAR(static_cast<double>(wins) / n,
              oracle::LaplaceRaceProbability(c1, c0, b), 0.004);
}

TEST(PrivacyBudgetTest, Validate) {
  EXPECT_NO_THROW(PrivacyBudget::Pure(1.0).Validate());
  EXPECT_NO_THROW(PrivacyBudget::Approximate(kInfinity).Validate());
  EXPECT_THROW(PrivacyBudget::Pure(0.0).Validate(), InvalidArgumentError);
  EXPECT_THROW((PrivacyBudget{1.0, 1.0}).Validate(), InvalidArgumentError);
  EXPECT_THROW((PrivacyBudget{1.0, -0.1}).Validate(), InvalidArgumentError);
  EXPECT_TRUE(PrivacyBudget::Approximate(kInfinity).IsInfinite());
}

}  // namespace
}  // namespace dpsynth::dp
