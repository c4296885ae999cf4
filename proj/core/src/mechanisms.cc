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

#include <algorithm>
#include <string>

#include "dpsynth/format.h"

namespace dpsynth::dp {
namespace {

void CheckEpsilon(double epsilon) {
  if (!(epsilon > 0.0)) {
    throw InvalidArgumentError("epsilon must be positive, got " +
                               FormatDouble(epsilon));
  }
}

void CheckSensitivity(double sensitivity) {
  if (!(sensitivity > 0.0) || std::isinf(sensitivity)) {
    throw InvalidArgumentError("sensitivity must be positive and finite, got " +
                               FormatDouble(sensitivity));
  }
}

}  // namespace

void PrivacyBudget::Validate() const {
  CheckEpsilon(epsilon);
  if (!(delta >= 0.0 && delta < 1.0)) {
    throw InvalidArgumentError("delta must be in [0, 1), got " +
                               FormatDouble(delta));
  }
}

double LaplaceScale(double sensitivity, double epsilon) {
  CheckSensitivity(sensitivity);
  CheckEpsilon(epsilon);
  return std::isinf(epsilon) ? 0.0 : sensitivity / epsilon;
}

double SampleLaplace(double scale, Rng& rng) {
  // Difference of two unit exponentials is a standard Laplace variate.
  const double e1 = -std::log(rng.UniformPositive());
  const double e2 = -std::log(rng.UniformPositive());
  return scale * (e1 - e2);
}

void AddLaplaceNoise(std::span<double> values, double sensitivity,
                     double epsilon, Rng& rng) {
  const double b = LaplaceScale(sensitivity, epsilon);
  if (b == 0.0) return;
  ++rng.counters().laplace_calls;
  for (double& v : values) v += SampleLaplace(b, rng);
}

std::vector<double> LaplaceMechanism(std::span<const double> values,
                                     double sensitivity, double epsilon,
                                     Rng& rng) {
  std::vector<double> out(values.begin(), values.end());
  AddLaplaceNoise(out, sensitivity, epsilon, rng);
  return out;
}

std::vector<double> GaussianNoise(std::size_t count, double sigma, Rng& rng) {
  if (!(sigma > 0.0) || std::isinf(sigma)) {
    throw InvalidArgumentError("sigma must be positive and finite, got " +
                               FormatDouble(sigma));
  }
  ++rng.counters().gaussian_calls;
  std::vector<double> out(count);
  for (double& v : out) v = sigma * rng.Normal();
  return out;
}

std::size_t ExponentialMechanism(std::span<const double> utilities,
                                 double sensitivity, double epsilon, Rng& rng) {
  if (utilities.empty()) {
    throw InvalidArgumentError("exponential mechanism needs candidates");
  }
  CheckSensitivity(sensitivity);
  CheckEpsilon(epsilon);
  if (std::isinf(epsilon)) {
    const double best = *std::max_element(utilities.begin(), utilities.end());
    std::vector<std::size_t> ties;
    for (std::size_t i = 0; i < utilities.size(); ++i) {
      if (utilities[i] == best) ties.push_back(i);
    }
    return ties.size() == 1 ? ties[0] : ties[rng.UniformIndex(ties.size())];
  }
  ++rng.counters().exponential_calls;
  const double scale = epsilon / (2.0 * sensitivity);
  const double top = *std::max_element(utilities.begin(), utilities.end());
  std::vector<double> cumulative(utilities.size());
  double total = 0.0;
  for (std::size_t i = 0; i < utilities.size(); ++i) {
    total += std::exp(scale * (utilities[i] - top));
    cumulative[i] = total;
  }
  const double u = rng.Uniform() * total;
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(it - cumulative.begin(), utilities.size() - 1);
}

}  // namespace dpsynth::dp
