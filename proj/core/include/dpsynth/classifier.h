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
// L2-regularized logistic regression, its epsilon-DP variant by objective
// perturbation, and confusion-matrix metrics.
//
// Every non-class column is one-hot encoded and a constant bias feature is
// appended; the row is then scaled by 1/sqrt(columns) so that every feature
// vector has unit norm, as objective perturbation requires.
#ifndef DPSYNTH_CLASSIFIER_H_
#define DPSYNTH_CLASSIFIER_H_

#include <Eigen/Dense>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dpsynth/data.h"
#include "dpsynth/rng.h"

namespace dpsynth::classifier {

class FeatureEncoder {
 public:
  explicit FeatureEncoder(std::shared_ptr<const data::Schema> schema);

  const data::Schema& schema() const { return *schema_; }
  int width() const { return width_; }
  double scale() const { return scale_; }

  // n x width, rows of unit norm.
  Eigen::MatrixXd Encode(const data::TabularDataset& dataset) const;

 private:
  std::shared_ptr<const data::Schema> schema_;
  std::vector<int> feature_columns_;
  std::vector<int> offsets_;
  int width_ = 0;
  double scale_ = 1.0;
};

// Minimizes (1/n) sum log(1 + exp(-y w.x)) + (reg/2)|w|^2 + linear.w / n with
// Newton's method, to gradient norm `tolerance` or until the predicted
// decrease drops below the objective's rounding error. y is +-1.
Eigen::VectorXd MinimizeLogistic(const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y, double reg,
                                 const Eigen::VectorXd& linear,
                                 double tolerance = 1e-10);

// Value of the objective above.
double LogisticObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         double reg, const Eigen::VectorXd& linear,
                         const Eigen::VectorXd& w);

// Objective-perturbation parameters for n records and regularization reg.
struct PerturbationPlan {
  double epsilon = 0.0;        // requested budget
  double epsilon_prime = 0.0;  // budget left for the linear term
  double extra_reg = 0.0;      // added to reg when the request is too small
};
PerturbationPlan PlanPerturbation(double epsilon, std::size_t n, double reg);

// Linear term b with density proportional to exp(-epsilon_prime |b| / 2):
// uniform direction, norm ~ Gamma(dim, 2 / epsilon_prime).
Eigen::VectorXd SamplePerturbation(int dim, double epsilon_prime, Rng& rng);

class LrModel {
 public:
  LrModel(std::shared_ptr<const data::Schema> schema, Eigen::MatrixXd weights,
          double regularization, double epsilon, double extra_regularization);

  const data::Schema& schema() const { return encoder_.schema(); }
  // width x classifiers; one column for binary data, one per class otherwise.
  const Eigen::MatrixXd& weights() const { return weights_; }
  double regularization() const { return regularization_; }
  double epsilon() const { return epsilon_; }
  // Non-zero when the regularization was raised to keep the DP claim valid.
  double extra_regularization() const { return extra_regularization_; }
  double feature_scale() const { return encoder_.scale(); }
  int classes() const;

  std::vector<int> Predict(const data::TabularDataset& dataset) const;

  std::string ToJson() const;
  static LrModel FromJson(std::string_view text);

 private:
  FeatureEncoder encoder_;
  Eigen::MatrixXd weights_;
  double regularization_;
  double epsilon_;
  double extra_regularization_;
};

inline constexpr double kDefaultRegularization = 1e-3;

// Throws DataError when the training data has a single class.
LrModel TrainLr(const data::TabularDataset& dataset,
                double reg = kDefaultRegularization);
// Multi-class data trains one classifier per class, each with epsilon / K.
LrModel TrainDpLr(const data::TabularDataset& dataset, double epsilon,
                  double reg, Rng& rng);

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

struct GroupAccuracy {
  data::SubgroupKey key;
  std::size_t support = 0;
  double accuracy = kUndefined;
};

struct MetricsReport {
  std::vector<std::string> class_labels;
  // confusion[actual][predicted]
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<double> precision;  // NaN when nothing was predicted as the class
  std::vector<double> recall;     // NaN when the class is absent
  std::vector<std::size_t> support;
  double accuracy = kUndefined;
  std::vector<GroupAccuracy> groups;

  std::string ToJson() const;
};

// Throws InvalidArgumentError for mismatched lengths or an empty input.
MetricsReport ComputeMetrics(const std::vector<int>& actual,
                             const std::vector<int>& predicted, int classes);

MetricsReport Evaluate(const LrModel& model, const data::TabularDataset& test,
                       const std::vector<data::Subgroup>& subgroups = {});

}  // namespace dpsynth::classifier

#endif  // DPSYNTH_CLASSIFIER_H_
