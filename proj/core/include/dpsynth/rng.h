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
#ifndef DPSYNTH_RNG_H_
#define DPSYNTH_RNG_H_

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace dpsynth {

// Number of times each noise primitive consumed randomness through a given
// Rng. The harness uses these to assert that non-private runs never touch a
// mechanism.
struct MechanismCounters {
  std::int64_t laplace_calls = 0;
  std::int64_t gaussian_calls = 0;
  std::int64_t exponential_calls = 0;
  std::int64_t vote_calls = 0;
  std::int64_t perturbation_calls = 0;

  std::int64_t Total() const {
    return laplace_calls + gaussian_calls + exponential_calls + vote_calls +
           perturbation_calls;
  }
};

// Seeded random source. There is no global generator anywhere in the library;
// every stochastic operation takes one of these by reference.
class Rng {
 public:
  using Engine = std::mt19937_64;

  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  Engine& engine() { return engine_; }
  std::uint64_t seed() const { return seed_; }

  // Uniform double in [0, 1) built from the top 53 bits of one draw.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform double in (0, 1); never returns 0.
  double UniformPositive() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double Normal() { return normal_(engine_); }

  // Uniform integer in [0, n).
  std::uint64_t UniformIndex(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  MechanismCounters& counters() { return counters_; }
  const MechanismCounters& counters() const { return counters_; }

 private:
  Engine engine_;
  std::uint64_t seed_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  MechanismCounters counters_;
};

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; stable across platforms, used to fold names into seeds.
constexpr std::uint64_t HashString(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Order-sensitive combination of seed components.
constexpr std::uint64_t DeriveSeed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = Mix64(h ^ Mix64(p));
  return h;
}

}  // namespace dpsynth

#endif  // DPSYNTH_RNG_H_
