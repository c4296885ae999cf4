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
#ifndef DPSYNTH_ACCOUNTANT_H_
#define DPSYNTH_ACCOUNTANT_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dpsynth::dp {

// Moments accountant over a fixed grid of integer moment orders.
//
// For every order lambda the accountant keeps an upper bound on the log
// moment of the privacy loss random variable, log E[exp(lambda * L)].
// Bounds add under composition, and
//
//   epsilon(delta) = min_lambda (logmoment(lambda) + log(1 / delta)) / lambda.
//
// Orders are stored as Renyi orders alpha = lambda + 1; the default grid is
// alpha = 2..64. While only pure-DP steps have been recorded the accountant
// also tracks their plain sum, and reports the smaller of the two.
class Accountant {
 public:
  enum class StepKind { kSubsampledGaussian, kLaplaceVote };

  struct Step {
    StepKind kind;
    // Sampling rate for subsampled Gaussian steps, 1 for votes.
    double sampling_rate;
    // Noise multiplier sigma, or Laplace scale.
    double noise;
    // 1 for Gaussian steps (sigma is relative to the clip norm).
    double sensitivity;
    std::int64_t count;
  };

  static std::vector<int> DefaultOrders();

  explicit Accountant(std::vector<int> renyi_orders = DefaultOrders());

  // Composes `steps` iterations of the sampled Gaussian mechanism with
  // sampling rate q and noise multiplier sigma.
  void AddSubsampledGaussian(double q, double sigma, std::int64_t steps);

  // Composes `steps` Laplace-noised answers whose L1 sensitivity is
  // `sensitivity` and whose noise scale is `scale` (pure epsilon of each is
  // sensitivity / scale). Data-independent bound.
  void AddLaplaceVote(double scale, std::int64_t steps,
                      double sensitivity = 1.0);

  // Smallest epsilon such that the recorded steps are (epsilon, delta)-DP.
  // A fresh accountant reports 0.
  double EpsilonAt(double delta) const;

  // The Renyi order achieving EpsilonAt(delta), or 0 when the pure-DP sum
  // was smaller.
  int OptimalOrder(double delta) const;

  const std::vector<int>& orders() const { return orders_; }
  std::span<const double> log_moments() const { return log_moments_; }
  const std::vector<Step>& steps() const { return steps_; }
  double pure_epsilon() const { return pure_epsilon_; }
  bool empty() const { return steps_.empty(); }

  std::string ToJson() const;
  static Accountant FromJson(std::string_view text);

 private:
  std::vector<int> orders_;
  std::vector<double> log_moments_;
  double pure_epsilon_ = 0.0;
  std::vector<Step> steps_;
};

// log A_alpha for one step of the sampled Gaussian mechanism at integer
// Renyi order alpha (binomial expansion, evaluated in log space).
double SubsampledGaussianLogMoment(double q, double sigma, int alpha);

// Log-moment bound at Renyi order alpha for a pure epsilon0-DP mechanism:
// min(lambda * eps0, eps0^2 * lambda * (lambda + 1) / 2), lambda = alpha - 1.
double PureDpLogMoment(double epsilon0, int alpha);

}  // namespace dpsynth::dp

#endif  // DPSYNTH_ACCOUNTANT_H_
