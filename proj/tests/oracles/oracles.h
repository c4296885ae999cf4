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
// Reference computations used by the tests. Each one follows a different
// route from the library code it checks: numeric integration instead of
// closed forms, finite differences instead of backpropagation, brute-force
// tallies instead of indexed counting.
#ifndef DPSYNTH_TESTS_ORACLES_H_
#define DPSYNTH_TESTS_ORACLES_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace dpsynth::oracle {

// Renyi divergence of order alpha between the subsampled Gaussian mixture
// (1-q) N(0, s^2) + q N(1, s^2) and N(0, s^2), by trapezoidal integration
// of the likelihood ratio moment in log space.
double SubsampledGaussianRdp(double q, double sigma, double alpha);

// (epsilon, delta) after T identical steps with per-step RDP curve `rdp`,
// minimized over integer orders [2, max_order].
double EpsilonFromRdp(const std::function<double(double)>& rdp,
                      std::int64_t steps, double delta, int max_order = 64);

// P(c1 + L1 > c0 + L0) for iid Laplace(0, b) L0, L1, by numeric
// convolution. Ties have probability zero.
double LaplaceRaceProbability(double c1, double c0, double b);

// Central finite-difference gradient of f at x.
std::vector<double> FiniteDifference(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h);

// confusion[actual][predicted] by direct counting.
std::vector<std::vector<std::size_t>> Confusion(const std::vector<int>& actual,
                                                const std::vector<int>& predicted,
                                                int classes);

// Counts of every value combination over `columns` of a row-major table.
std::map<std::vector<int>, std::size_t> CrossTab(
    const std::vector<std::vector<int>>& rows, const std::vector<int>& columns);

// Mutual information in bits of a joint count table, from the definition
// sum p(x,y) log2(p(x,y) / (p(x) p(y))).
double MutualInformationBits(const std::vector<std::vector<double>>& counts);

// Full-batch gradient descent on the L2-regularized mean logistic loss
// (labels +-1), run until the step no longer changes the loss. Returns the
// final objective value.
double LogisticDescentObjective(const std::vector<std::vector<double>>& x,
                                const std::vector<double>& y, double reg,
                                std::vector<double>* weights = nullptr);

// Kolmogorov-Smirnov statistic of a sample against Gamma(shape, scale).
double GammaKsStatistic(std::vector<double> sample, double shape, double scale);

// Expected value of the minority share after adding Laplace(b) to counts
// (n_min, n_maj), clipping at zero and normalizing (uniform when both clip),
// by 2-D numeric integration.
double ClippedShareExpectation(double n_min, double n_maj, double b);

}  // namespace dpsynth::oracle

#endif  // DPSYNTH_TESTS_ORACLES_H_
