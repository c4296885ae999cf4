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
#include "dpsynth/classifier.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dpsynth/errors.h"
#include "dpsynth/format.h"
#include "json.hpp"

namespace dpsynth::classifier {
namespace {

// Loss-dependent constant of the logistic loss (bound on its second
// derivative).
constexpr double kLossCurvature = 0.25;

double Softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<int> PresentClasses(const data::TabularDataset& ds) {
  const int k = ds.schema().DomainSize(ds.schema().class_index());
  std::vector<int> seen(k, 0);
  for (std::int32_t v : ds.ColumnValues(ds.schema().class_index())) seen[v] = 1;
  std::vector<int> out;
  for (int c = 0; c < k; ++c) {
    if (seen[c]) out.push_back(c);
  }
  return out;
}

Eigen::VectorXd SignedLabels(const data::TabularDataset& ds, int positive) {
  const int ci = ds.schema().class_index();
  Eigen::VectorXd y(static_cast<Eigen::Index>(ds.rows()));
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    y(static_cast<Eigen::Index>(r)) = ds.at(r, ci) == positive ? 1.0 : -1.0;
  }
  return y;
}

nlohmann::json NumberOrNull(double v) {
  return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
}

}  // namespace

FeatureEncoder::FeatureEncoder(std::shared_ptr<const data::Schema> schema)
    : schema_(std::move(schema)) {
  if (!schema_) throw InvalidArgumentError("encoder needs a schema");
  for (std::size_t c = 0; c < schema_->size(); ++c) {
    if (static_cast<int>(c) == schema_->class_index()) continue;
    feature_columns_.push_back(static_cast<int>(c));
    offsets_.push_back(width_);
    width_ += schema_->DomainSize(c);
  }
  width_ += 1;  // bias
  scale_ = 1.0 / std::sqrt(static_cast<double>(feature_columns_.size() + 1));
}

Eigen::MatrixXd FeatureEncoder::Encode(const data::TabularDataset& dataset) const {
  if (!(dataset.schema() == *schema_)) {
    throw InvalidArgumentError("dataset schema differs from the model's");
  }
  Eigen::MatrixXd x =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dataset.rows()), width_);
  for (std::size_t r = 0; r < dataset.rows(); ++r) {
    const auto row = dataset.row(r);
    const auto i = static_cast<Eigen::Index>(r);
    for (std::size_t f = 0; f < feature_columns_.size(); ++f) {
      x(i, offsets_[f] + row[feature_columns_[f]]) = scale_;
    }
    x(i, width_ - 1) = scale_;
  }
  return x;
}

double LogisticObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                         double reg, const Eigen::VectorXd& linear,
                         const Eigen::VectorXd& w) {
  const Eigen::VectorXd margin = (x * w).cwiseProduct(y);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < margin.size(); ++i) loss += Softplus(-margin(i));
  const double n = static_cast<double>(x.rows());
  return loss / n + 0.5 * reg * w.squaredNorm() + linear.dot(w) / n;
}

Eigen::VectorXd MinimizeLogistic(const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& y, double reg,
                                 const Eigen::VectorXd& linear,
                                 double tolerance) {
  if (x.rows() < 1 || x.rows() != y.size() || linear.size() != x.cols()) {
    throw InvalidArgumentError("logistic problem has inconsistent shapes");
  }
  if (!(reg > 0.0)) throw InvalidArgumentError("regularization must be positive");
  const double n = static_cast<double>(x.rows());
  const Eigen::Index d = x.cols();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  double f = LogisticObjective(x, y, reg, linear, w);
  constexpr int kMaxIterations = 200;
  for (int it = 0; it < kMaxIterations; ++it) {
    const Eigen::VectorXd margin = (x * w).cwiseProduct(y);
    Eigen::VectorXd coef(margin.size());
    Eigen::VectorXd curv(margin.size());
    for (Eigen::Index i = 0; i < margin.size(); ++i) {
      const double s = Sigmoid(-margin(i));
      coef(i) = -y(i) * s;
      curv(i) = s * (1.0 - s);
    }
    const Eigen::VectorXd grad =
        x.transpose() * coef / n + reg * w + linear / n;
    if (grad.norm() <= tolerance) break;
    Eigen::MatrixXd hessian =
        x.transpose() * curv.asDiagonal() * x / n;
    hessian.diagonal().array() += reg;
    const Eigen::VectorXd step = hessian.llt().solve(-grad);
    // Backtracking on the Armijo condition.
    double t = 1.0;
    const double slope = grad.dot(step);
    // The predicted decrease is below what the objective can resolve.
    if (-slope <= 16.0 * std::numeric_limits<double>::epsilon() *
                      std::max(1.0, std::abs(f))) {
      break;
    }
    Eigen::VectorXd next = w + step;
    double f_next = LogisticObjective(x, y, reg, linear, next);
    while (f_next > f + 1e-4 * t * slope && t > 1e-12) {
      t *= 0.5;
      next = w + t * step;
      f_next = LogisticObjective(x, y, reg, linear, next);
    }
    if (f_next >= f && t <= 1e-12) break;
    w = std::move(next);
    f = f_next;
  }
  return w;
}

PerturbationPlan PlanPerturbation(double epsilon, std::size_t n, double reg) {
  if (!(epsilon > 0.0)) throw InvalidArgumentError("epsilon must be positive");
  if (!(reg > 0.0)) throw InvalidArgumentError("regularization must be positive");
  if (n < 1) throw InvalidArgumentError("need at least one record");
  PerturbationPlan plan;
  plan.epsilon = epsilon;
  if (std::isinf(epsilon)) {
    plan.epsilon_prime = epsilon;
    return plan;
  }
  const double nn = static_cast<double>(n);
  plan.epsilon_prime =
      epsilon - 2.0 * std::log1p(kLossCurvature / (nn * reg));
  if (plan.epsilon_prime <= 0.0) {
    plan.extra_reg = kLossCurvature / (nn * std::expm1(epsilon / 4.0)) - reg;
    plan.epsilon_prime = epsilon / 2.0;
  }
  return plan;
}

Eigen::VectorXd SamplePerturbation(int dim, double epsilon_prime, Rng& rng) {
  if (dim < 1) throw InvalidArgumentError("dimension must be positive");
  if (!(epsilon_prime > 0.0)) {
    throw InvalidArgumentError("epsilon_prime must be positive");
  }
  if (std::isinf(epsilon_prime)) return Eigen::VectorXd::Zero(dim);
  ++rng.counters().perturbation_calls;
  Eigen::VectorXd dir(dim);
  do {
    for (int i = 0; i < dim; ++i) dir(i) = rng.Normal();
  } while (dir.norm() == 0.0);
  std::gamma_distribution<double> norm(static_cast<double>(dim),
                                       2.0 / epsilon_prime);
  return dir.normalized() * norm(rng.engine());
}

LrModel::LrModel(std::shared_ptr<const data::Schema> schema,
                 Eigen::MatrixXd weights, double regularization,
                 double epsilon, double extra_regularization)
    : encoder_(std::move(schema)),
      weights_(std::move(weights)),
      regularization_(regularization),
      epsilon_(epsilon),
      extra_regularization_(extra_regularization) {
  const int k = encoder_.schema().DomainSize(encoder_.schema().class_index());
  const int expected_cols = k == 2 ? 1 : k;
  if (weights_.rows() != encoder_.width() || weights_.cols() != expected_cols) {
    throw InvalidArgumentError("weight matrix does not match the schema");
  }
  if (!weights_.allFinite()) throw InvalidArgumentError("non-finite weights");
}

int LrModel::classes() const {
  return encoder_.schema().DomainSize(encoder_.schema().class_index());
}

std::vector<int> LrModel::Predict(const data::TabularDataset& dataset) const {
  const Eigen::MatrixXd scores = encoder_.Encode(dataset) * weights_;
  std::vector<int> out(dataset.rows());
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    if (scores.cols() == 1) {
      out[r] = scores(r, 0) > 0.0 ? 1 : 0;
    } else {
      Eigen::Index best = 0;
      scores.row(r).maxCoeff(&best);
      out[r] = static_cast<int>(best);
    }
  }
  return out;
}

std::string LrModel::ToJson() const {
  nlohmann::json j;
  j["format"] = "dpsynth.lr";
  j["version"] = 1;
  j["schema"] = nlohmann::json::parse(encoder_.schema().ToJson());
  j["rows"] = weights_.rows();
  j["cols"] = weights_.cols();
  j["weights"] = std::vector<double>(weights_.data(),
                                     weights_.data() + weights_.size());
  j["regularization"] = regularization_;
  j["extra_regularization"] = extra_regularization_;
  j["epsilon"] = FormatDouble(epsilon_);
  j["feature_scale"] = encoder_.scale();
  return j.dump();
}

LrModel LrModel::FromJson(std::string_view text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "dpsynth.lr" || j.value("version", 0) != 1) {
      throw InvalidArgumentError("not a version 1 dpsynth LR model");
    }
    auto schema = std::make_shared<const data::Schema>(
        data::Schema::FromJson(j.at("schema").dump()));
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto w = j.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols) {
      throw InvalidArgumentError("weights do not match their shape");
    }
    return LrModel(std::move(schema),
                   Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols),
                   j.at("regularization").get<double>(),
                   ParseDouble(j.at("epsilon").get<std::string>()),
                   j.at("extra_regularization").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgumentError(std::string("malformed LR JSON: ") + e.what());
  }
}

namespace {

LrModel TrainImpl(const data::TabularDataset& dataset, double epsilon,
                  double reg, Rng* rng) {
  if (PresentClasses(dataset).size() < 2) {
    throw DataError("training data contains a single class");
  }
  const FeatureEncoder encoder(dataset.schema_ptr());
  const Eigen::MatrixXd x = encoder.Encode(dataset);
  const int k = dataset.schema().DomainSize(dataset.schema().class_index());
  const int models = k == 2 ? 1 : k;
  const double per_model = std::isinf(epsilon) ? epsilon : epsilon / models;
  const PerturbationPlan plan = PlanPerturbation(per_model, dataset.rows(), reg);
  Eigen::MatrixXd weights(encoder.width(), models);
  for (int m = 0; m < models; ++m) {
    const int positive = k == 2 ? 1 : m;
    Eigen::VectorXd linear = Eigen::VectorXd::Zero(encoder.width());
    if (rng != nullptr && !std::isinf(per_model)) {
      linear = SamplePerturbation(encoder.width(), plan.epsilon_prime, *rng);
    }
    weights.col(m) = MinimizeLogistic(x, SignedLabels(dataset, positive),
                                      reg + plan.extra_reg, linear);
  }
  return LrModel(dataset.schema_ptr(), std::move(weights), reg, epsilon,
                 plan.extra_reg);
}

}  // namespace

LrModel TrainLr(const data::TabularDataset& dataset, double reg) {
  return TrainImpl(dataset, std::numeric_limits<double>::infinity(), reg,
                   nullptr);
}

LrModel TrainDpLr(const data::TabularDataset& dataset, double epsilon,
                  double reg, Rng& rng) {
  if (!(epsilon > 0.0)) throw InvalidArgumentError("epsilon must be positive");
  return TrainImpl(dataset, epsilon, reg, &rng);
}

MetricsReport ComputeMetrics(const std::vector<int>& actual,
                             const std::vector<int>& predicted, int classes) {
  if (actual.empty()) throw InvalidArgumentError("empty test set");
  if (actual.size() != predicted.size()) {
    throw InvalidArgumentError("label vectors differ in length");
  }
  if (classes < 1) throw InvalidArgumentError("need at least one class");
  MetricsReport r;
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] < 0 || actual[i] >= classes || predicted[i] < 0 ||
        predicted[i] >= classes) {
      throw InvalidArgumentError("label out of range");
    }
    ++r.confusion[actual[i]][predicted[i]];
  }
  std::size_t correct = 0;
  r.support.assign(classes, 0);
  r.precision.assign(classes, kUndefined);
  r.recall.assign(classes, kUndefined);
  for (int c = 0; c < classes; ++c) {
    std::size_t predicted_c = 0;
    for (int a = 0; a < classes; ++a) {
      r.support[c] += r.confusion[c][a];
      predicted_c += r.confusion[a][c];
    }
    const double tp = static_cast<double>(r.confusion[c][c]);
    correct += r.confusion[c][c];
    if (predicted_c > 0) r.precision[c] = tp / static_cast<double>(predicted_c);
    if (r.support[c] > 0) r.recall[c] = tp / static_cast<double>(r.support[c]);
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(actual.size());
  return r;
}

MetricsReport Evaluate(const LrModel& model, const data::TabularDataset& test,
                       const std::vector<data::Subgroup>& subgroups) {
  if (test.rows() == 0) throw InvalidArgumentError("empty test set");
  const std::vector<int> predicted = model.Predict(test);
  const auto actual32 = test.ColumnValues(test.schema().class_index());
  const std::vector<int> actual(actual32.begin(), actual32.end());
  MetricsReport r = ComputeMetrics(actual, predicted, model.classes());
  const int ci = test.schema().class_index();
  for (int c = 0; c < model.classes(); ++c) {
    r.class_labels.push_back(test.schema().Label(ci, c));
  }
  for (const data::Subgroup& g : subgroups) {
    GroupAccuracy ga;
    ga.key = g.key;
    ga.support = g.rows.size();
    std::size_t correct = 0;
    for (std::size_t row : g.rows) {
      if (row >= test.rows()) throw InvalidArgumentError("subgroup row out of range");
      correct += actual[row] == predicted[row] ? 1 : 0;
    }
    if (ga.support > 0) {
      ga.accuracy = static_cast<double>(correct) / static_cast<double>(ga.support);
    }
    r.groups.push_back(std::move(ga));
  }
  return r;
}

std::string MetricsReport::ToJson() const {
  nlohmann::json j;
  j["accuracy"] = NumberOrNull(accuracy);
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < precision.size(); ++c) {
    classes.push_back(
        {{"label", c < class_labels.size() ? class_labels[c] : std::to_string(c)},
         {"precision", NumberOrNull(precision[c])},
         {"recall", NumberOrNull(recall[c])},
         {"support", support[c]}});
  }
  j["classes"] = std::move(classes);
  j["confusion"] = confusion;
  nlohmann::json group_json = nlohmann::json::array();
  for (const GroupAccuracy& g : groups) {
    group_json.push_back({{"group", g.key.ToString()},
                      {"support", g.support},
                      {"accuracy", NumberOrNull(g.accuracy)}});
  }
  j["groups"] = std::move(group_json);
  return j.dump();
}

}  // namespace dpsynth::classifier
