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
#include "dpsynth/accountant.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpsynth/errors.h"
#include "dpsynth/format.h"
#include "json.hpp"

namespace dpsynth::dp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double LogAddExp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double LogBinomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

double SubsampledGaussianLogMoment(double q, double sigma, int alpha) {
  if (q == 1.0) return alpha * (alpha - 1.0) / (2.0 * sigma * sigma);
  double acc = -kInf;
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  for (int k = 0; k <= alpha; ++k) {
    const double term = LogBinomial(alpha, k) + (alpha - k) * log_1mq +
                        k * log_q + (k * (k - 1.0)) / (2.0 * sigma * sigma);
    acc = LogAddExp(acc, term);
  }
  // Rounding can push tiny values slightly below zero.
  return std::max(acc, 0.0);
}

double PureDpLogMoment(double epsilon0, int alpha) {
  const double lambda = alpha - 1.0;
  return std::min(lambda * epsilon0,
                  epsilon0 * epsilon0 * lambda * (lambda + 1.0) / 2.0);
}

std::vector<int> Accountant::DefaultOrders() {
  std::vector<int> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  return orders;
}

Accountant::Accountant(std::vector<int> renyi_orders)
    : orders_(std::move(renyi_orders)), log_moments_(orders_.size(), 0.0) {
  if (orders_.empty()) throw InvalidArgumentError("accountant needs orders");
  for (int a : orders_) {
    if (a < 2) throw InvalidArgumentError("Renyi orders must be >= 2");
  }
}

void Accountant::AddSubsampledGaussian(double q, double sigma,
                                       std::int64_t steps) {
  if (!(q > 0.0 && q <= 1.0)) {
    throw InvalidArgumentError("sampling rate must be in (0, 1], got " +
                               FormatDouble(q));
  }
  if (!(sigma > 0.0) || std::isinf(sigma)) {
    throw InvalidArgumentError("noise multiplier must be positive, got " +
                               FormatDouble(sigma));
  }
  if (steps < 0) throw InvalidArgumentError("steps must be non-negative");
  if (steps == 0) return;
  for (std::size_t i = 0; i < orders_.size(); ++i) {
    log_moments_[i] += static_cast<double>(steps) *
                       SubsampledGaussianLogMoment(q, sigma, orders_[i]);
  }
  pure_epsilon_ = kInf;
  steps_.push_back({StepKind::kSubsampledGaussian, q, sigma, 1.0, steps});
}

void Accountant::AddLaplaceVote(double scale, std::int64_t steps,
                                double sensitivity) {
  if (!(scale > 0.0) || std::isinf(scale)) {
    throw InvalidArgumentError("Laplace scale must be positive, got " +
                               FormatDouble(scale));
  }
  if (!(sensitivity > 0.0)) {
    throw InvalidArgumentError("sensitivity must be positive");
  }
  if (steps < 0) throw InvalidArgumentError("steps must be non-negative");
  if (steps == 0) return;
  const double eps0 = sensitivity / scale;
  for (std::size_t i = 0; i < orders_.size(); ++i) {
    log_moments_[i] +=
        static_cast<double>(steps) * PureDpLogMoment(eps0, orders_[i]);
  }
  pure_epsilon_ += static_cast<double>(steps) * eps0;
  steps_.push_back({StepKind::kLaplaceVote, 1.0, scale, sensitivity, steps});
}

double Accountant::EpsilonAt(double delta) const {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw InvalidArgumentError("delta must be in (0, 1), got " +
                               FormatDouble(delta));
  }
  if (steps_.empty()) return 0.0;
  double best = pure_epsilon_;
  const double log_inv_delta = std::log(1.0 / delta);
  for (std::size_t i = 0; i < orders_.size(); ++i) {
    const double lambda = orders_[i] - 1.0;
    best = std::min(best, (log_moments_[i] + log_inv_delta) / lambda);
  }
  return best;
}

int Accountant::OptimalOrder(double delta) const {
  if (steps_.empty()) return 0;
  double best = pure_epsilon_;
  int order = 0;
  const double log_inv_delta = std::log(1.0 / delta);
  for (std::size_t i = 0; i < orders_.size(); ++i) {
    const double lambda = orders_[i] - 1.0;
    const double e = (log_moments_[i] + log_inv_delta) / lambda;
    if (e < best) {
      best = e;
      order = orders_[i];
    }
  }
  return order;
}

std::string Accountant::ToJson() const {
  nlohmann::json j;
  j["orders"] = orders_;
  j["log_moments"] = log_moments_;
  j["pure_epsilon"] = FormatDouble(pure_epsilon_);
  nlohmann::json steps = nlohmann::json::array();
  for (const Step& s : steps_) {
    steps.push_back({{"kind", s.kind == StepKind::kSubsampledGaussian
                                  ? "subsampled_gaussian"
                                  : "laplace_vote"},
                     {"sampling_rate", s.sampling_rate},
                     {"noise", s.noise},
                     {"sensitivity", s.sensitivity},
                     {"count", s.count}});
  }
  j["steps"] = std::move(steps);
  return j.dump();
}

Accountant Accountant::FromJson(std::string_view text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    Accountant a(j.at("orders").get<std::vector<int>>());
    // Replaying the step log reproduces the accumulators exactly.
    for (const auto& s : j.at("steps")) {
      const std::string kind = s.at("kind").get<std::string>();
      if (kind == "subsampled_gaussian") {
        a.AddSubsampledGaussian(s.at("sampling_rate").get<double>(),
                                s.at("noise").get<double>(),
                                s.at("count").get<std::int64_t>());
      } else if (kind == "laplace_vote") {
        a.AddLaplaceVote(s.at("noise").get<double>(),
                         s.at("count").get<std::int64_t>(),
                         s.at("sensitivity").get<double>());
      } else {
        throw InvalidArgumentError("unknown accountant step '" + kind + "'");
      }
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgumentError(std::string("malformed accountant JSON: ") +
                               e.what());
  }
}

}  // namespace dpsynth::dp
