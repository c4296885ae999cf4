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
#include "dpsynth/gan.h"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "dpsynth/desk.h"
#include "dpsynth/errors.h"
#include "oracles/oracles.h"

namespace dpsynth::gan {
namespace {

Architecture Tiny() {
  Architecture a;
  a.noise_dim = 4;
  a.generator_hidden = {6};
  a.discriminator_hidden = {5};
  return a;
}

TEST(OneHotEncoderTest, EncodesOneIndicatorPerBlock) {
  const data::TabularDataset d = desk::Generate(1, 50, 10);
  const OneHotEncoder enc(d.schema_ptr());
  const nn::Matrix x = enc.Encode(d);
  ASSERT_EQ(x.rows(), 50);
  ASSERT_EQ(x.cols(), enc.width());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < enc.block_sizes().size(); ++c) {
      EXPECT_EQ(x.row(r).segment(enc.offsets()[c], enc.block_sizes()[c]).sum(), 1.0);
      EXPECT_EQ(x(r, enc.offsets()[c] + d.at(r, c)), 1.0);
    }
  }
}

TEST(OneHotEncoderTest, SamplingOneHotRowsReproducesData) {
  const data::TabularDataset d = desk::Generate(1, 50, 10);
  const OneHotEncoder enc(d.schema_ptr());
  Rng rng(1);
  EXPECT_EQ(enc.Sample(enc.Encode(d), rng, data::Provenance::kUnspecified), d);
  EXPECT_THROW(enc.Sample(nn::Matrix::Zero(1, enc.width() + 1), rng),
               InvalidArgumentError);
}

TEST(GeneratorTest, GradientMatchesFiniteDifference) {
  const data::TabularDataset d = desk::Generate(1, 50, 10);
  const OneHotEncoder enc(d.schema_ptr());
  const auto& blocks = enc.block_sizes();
  for (double temperature : {0.0, 1.0, 0.3}) {
    Rng rng(2);
    const nn::Mlp base = CreateGenerator(Tiny(), enc.width(), rng);
    const nn::Matrix z = SampleNoise(3, 4, rng);
    nn::Matrix weight(3, enc.width());
    for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = rng.Normal();
    const auto loss = [&](const std::vector<double>& p) {
      nn::Mlp g = base;
      g.SetParameters(Eigen::Map<const nn::Vector>(p.data(), p.size()));
      Rng noise(77);
      return (RunGenerator(g, z, blocks, temperature, noise).probabilities.array() *
              weight.array())
          .sum();
    };
    const nn::Vector p = base.Parameters();
    const auto fd = oracle::FiniteDifference(
        loss, std::vector<double>(p.data(), p.data() + p.size()), 1e-6);
    Rng noise(77);
    const GeneratorPass pass = RunGenerator(base, z, blocks, temperature, noise);
    const nn::Vector g = GeneratorGradient(base, pass, weight, blocks);
    double diff = 0.0;
    double norm = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      diff += (g[i] - fd[i]) * (g[i] - fd[i]);
      norm += fd[i] * fd[i];
    }
    EXPECT_LT(std::sqrt(diff / norm), 1e-4) << temperature;
  }
}

TEST(GeneratorTest, LowTemperatureGivesNearOneHotRows) {
  const data::TabularDataset d = desk::Generate(1, 50, 10);
  const OneHotEncoder enc(d.schema_ptr());
  Rng rng(3);
  const nn::Mlp g = CreateGenerator(Tiny(), enc.width(), rng);
  const GeneratorPass pass =
      RunGenerator(g, SampleNoise(200, 4, rng), enc.block_sizes(), 0.001, rng);
  int near_one_hot = 0;
  for (Eigen::Index r = 0; r < 200; ++r) {
    near_one_hot += pass.probabilities.row(r).segment(0, enc.block_sizes()[0]).maxCoeff() > 0.99;
  }
  EXPECT_GT(near_one_hot, 190);
}

TEST(GanModelTest, GenerateAndJsonRoundTrip) {
  const data::TabularDataset d = desk::Generate(1, 50, 10);
  const OneHotEncoder enc(d.schema_ptr());
  Rng rng(4);
  TrainingSummary summary;
  summary.model = "dpwgan";
  summary.epsilon_target = 1.0;
  summary.private_steps = 12;
  const GanModel m(d.schema_ptr(), CreateGenerator(Tiny(), enc.width(), rng), 4,
                   summary);
  Rng r1(9);
  const data::TabularDataset s = m.Generate(5000, r1);
  EXPECT_EQ(s.rows(), 5000u);
  EXPECT_EQ(s.provenance(), data::Provenance::kSynthetic);
  const GanModel back = GanModel::FromJson(m.ToJson());
  Rng r2(9);
  EXPECT_EQ(back.Generate(5000, r2), s);
  EXPECT_EQ(back.summary().private_steps, 12);
  EXPECT_THROW(m.Generate(0, r1), InvalidArgumentError);
}

TEST(SampleBatchTest, DistinctAndInRange) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto b = SampleBatch(50, 20, rng);
    const std::set<std::size_t> s(b.begin(), b.end());
    EXPECT_EQ(s.size(), 20u);
    EXPECT_LT(*s.rbegin(), 50u);
  }
  EXPECT_EQ(SampleBatch(5, 5, rng).size(), 5u);
  EXPECT_THROW(SampleBatch(5, 6, rng), InvalidArgumentError);
  EXPECT_THROW(SampleBatch(5, 0, rng), InvalidArgumentError);
}

TEST(SampleBatchTest, UniformInclusion) {
  Rng rng(6);
  std::vector<int> hits(10, 0);
  for (int trial = 0; trial < 20000; ++trial) {
    for (std::size_t i : SampleBatch(10, 3, rng)) ++hits[i];
  }
  for (int h : hits) EXPECT_NEAR(h / 20000.0, 0.3, 0.015);
}

TEST(TrainingLogTest, CsvHeader) {
  std::ostringstream out;
  WriteTrainingLog({{50, 1.0, 2.0, 0.5}}, out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
            "iteration,discriminator_loss,generator_loss,epsilon_spent");
}

}  // namespace
}  // namespace dpsynth::gan
