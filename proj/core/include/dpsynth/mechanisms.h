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
// Additive-noise and selection mechanisms. An infinite epsilon means "no
// privacy": values pass through untouched and selection is an argmax.
#ifndef DPSYNTH_MECHANISMS_H_
#define DPSYNTH_MECHANISMS_H_

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "dpsynth/errors.h"
#include "dpsynth/rng.h"

namespace dpsynth::dp {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr double kDefaultGanDelta = 1e-5;

struct PrivacyBudget {
  double epsilon = kInfinity;
  double delta = 0.0;

  bool IsInfinite() const { return std::isinf(epsilon); }
  // Throws InvalidArgumentError unless epsilon > 0 and delta in [0, 1).
  void Validate() const;

  static PrivacyBudget Pure(double epsilon) { return {epsilon, 0.0}; }
  static PrivacyBudget Approximate(double epsilon,
                                   double delta = kDefaultGanDelta) {
    return {epsilon, delta};
  }
};

// Laplace scale b = sensitivity / epsilon (0 when epsilon is infinite).
double LaplaceScale(double sensitivity, double epsilon);

// One Laplace(0, scale) draw.
double SampleLaplace(double scale, Rng& rng);

std::vector<double> LaplaceMechanism(std::span<const double> values,
                                     double sensitivity, double epsilon,
                                     Rng& rng);
// In-place variant for large count tables.
void AddLaplaceNoise(std::span<double> values, double sensitivity,
                     double epsilon, Rng& rng);

// iid N(0, sigma^2) draws.
std::vector<double> GaussianNoise(std::size_t count, double sigma, Rng& rng);

// Returns the index of the selected candidate, drawn with probability
// proportional to exp(epsilon * u_i / (2 * sensitivity)). With infinite
// epsilon, returns an argmax (ties broken uniformly at random).
std::size_t ExponentialMechanism(std::span<const double> utilities,
                                 double sensitivity, double epsilon, Rng& rng);

template <typename T>
const T& ExponentialMechanism(std::span<const T> candidates,
                              std::span<const double> utilities,
                              double sensitivity, double epsilon, Rng& rng) {
  if (candidates.size() != utilities.size()) {
    throw InvalidArgumentError("candidates and utilities differ in length");
  }
  return candidates[ExponentialMechanism(utilities, sensitivity, epsilon, rng)];
}

}  // namespace dpsynth::dp

#endif  // DPSYNTH_MECHANISMS_H_
