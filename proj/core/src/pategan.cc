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
#include "dpsynth/pategan.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpsynth/accountant.h"
#include "dpsynth/errors.h"

namespace dpsynth::pategan {
namespace {

double Softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Binary cross-entropy on logits. Returns the mean loss and writes
// d loss / d logit into `grad`.
double LogisticLoss(const nn::Matrix& logits, const std::vector<double>& labels,
                    nn::Matrix& grad) {
  const Eigen::Index m = logits.rows();
  grad.resize(m, 1);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double l = logits(i, 0);
    const double y = labels[static_cast<std::size_t>(i)];
    loss += Softplus(l) - y * l;
    grad(i, 0) = (Sigmoid(l) - y) / static_cast<double>(m);
  }
  return loss / static_cast<double>(m);
}

double DiscriminatorStep(nn::Mlp& net, nn::Adam& opt, const nn::Matrix& x,
                         const std::vector<double>& labels) {
  const nn::ForwardCache cache = net.Forward(x);
  nn::Matrix grad;
  const double loss = LogisticLoss(cache.output, labels, grad);
  opt.Step(net, net.Backward(cache, grad).total);
  return loss;
}

nn::Matrix Rows(const nn::Matrix& x, const std::vector<std::size_t>& idx) {
  nn::Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

}  // namespace

void PateGanConfig::Validate() const {
  budget.Validate();
  if (!budget.IsInfinite() && !(budget.delta > 0.0)) {
    throw InvalidArgumentError("a finite PATE-GAN budget needs delta > 0");
  }
  if (teachers < 2) throw InvalidArgumentError("need at least two teachers");
  if (vote_scale && !(*vote_scale > 0.0 && std::isfinite(*vote_scale))) {
    throw InvalidArgumentError("vote_scale must be positive and finite");
  }
  if (target_queries < 0) throw InvalidArgumentError("target_queries must be >= 0");
  if (!(generator_learning_rate > 0.0) || !(teacher_learning_rate > 0.0) ||
      !(student_learning_rate > 0.0)) {
    throw InvalidArgumentError("learning rates must be positive");
  }
  if (batch_size < 1) throw InvalidArgumentError("batch_size must be positive");
  if (teacher_steps < 1 || student_steps < 1) {
    throw InvalidArgumentError("teacher_steps and student_steps must be positive");
  }
  if (max_iterations < 0) throw InvalidArgumentError("max_iterations must be >= 0");
  if (log_every < 1) throw InvalidArgumentError("log_every must be positive");
  if (architecture.noise_dim < 1) throw InvalidArgumentError("noise_dim must be positive");
}

std::vector<data::TabularDataset> Partition(const data::TabularDataset& dataset,
                                            int k, Rng& rng) {
  if (k < 1) throw InvalidArgumentError("partition count must be positive");
  const std::size_t n = dataset.rows();
  if (static_cast<std::size_t>(k) > n) {
    throw InvalidArgumentError("cannot split " + std::to_string(n) +
                               " rows into " + std::to_string(k) + " parts");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  std::vector<data::TabularDataset> parts;
  parts.reserve(k);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t start = 0;
  for (int p = 0; p < k; ++p) {
    const std::size_t size = base + (static_cast<std::size_t>(p) < extra ? 1 : 0);
    std::vector<std::size_t> rows(order.begin() + start,
                                  order.begin() + start + size);
    std::sort(rows.begin(), rows.end());
    parts.push_back(dataset.Select(rows));
    start += size;
  }
  return parts;
}

int NoisyVote(std::span<const int> votes, double scale, Rng& rng) {
  if (!(scale >= 0.0) || std::isinf(scale)) {
    throw InvalidArgumentError("vote scale must be finite and non-negative");
  }
  double count[2] = {0.0, 0.0};
  for (int v : votes) {
    if (v != 0 && v != 1) throw InvalidArgumentError("votes must be 0 or 1");
    count[v] += 1.0;
  }
  if (scale > 0.0) {
    ++rng.counters().vote_calls;
    count[0] += dp::SampleLaplace(scale, rng);
    count[1] += dp::SampleLaplace(scale, rng);
  }
  if (count[0] == count[1]) return static_cast<int>(rng.UniformIndex(2));
  return count[1] > count[0] ? 1 : 0;
}

std::int64_t MaxQueries(double scale, const dp::PrivacyBudget& budget,
                        std::int64_t limit) {
  if (budget.IsInfinite()) return limit;
  if (!(scale > 0.0) || std::isinf(scale)) {
    throw InvalidArgumentError("a finite budget needs a positive vote scale");
  }
  auto fits = [&](std::int64_t q) {
    dp::Accountant a;
    a.AddLaplaceVote(scale, q, kVoteSensitivity);
    return a.EpsilonAt(budget.delta) <= budget.epsilon;
  };
  if (limit <= 0 || !fits(1)) return 0;
  if (fits(limit)) return limit;
  std::int64_t lo = 1;
  std::int64_t hi = limit;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (fits(mid) ? lo : hi) = mid;
  }
  return lo;
}

double CalibrateVoteScale(std::int64_t queries, const dp::PrivacyBudget& budget) {
  budget.Validate();
  if (queries < 1) throw InvalidArgumentError("queries must be positive");
  if (budget.IsInfinite()) return 0.0;
  auto fits = [&](double scale) {
    dp::Accountant a;
    a.AddLaplaceVote(scale, queries, kVoteSensitivity);
    return a.EpsilonAt(budget.delta) <= budget.epsilon;
  };
  // The pure composition bound always fits at this scale.
  double hi = kVoteSensitivity * static_cast<double>(queries) / budget.epsilon;
  double lo = hi;
  while (fits(lo) && lo > 1e-12) lo /= 2.0;
  if (fits(lo)) return lo;
  while (hi / lo > 1.0 + 1e-9) {
    const double mid = std::sqrt(lo * hi);
    (fits(mid) ? hi : lo) = mid;
  }
  return hi;
}

TrainResult Train(const data::TabularDataset& dataset,
                  const PateGanConfig& config, Rng& rng) {
  config.Validate();
  const bool private_run = !config.budget.IsInfinite();
  const std::vector<data::TabularDataset> parts =
      Partition(dataset, config.teachers, rng);

  const gan::OneHotEncoder encoder(dataset.schema_ptr());
  const auto& blocks = encoder.block_sizes();
  const int width = encoder.width();
  const int noise_dim = config.architecture.noise_dim;
  std::vector<nn::Matrix> part_rows;
  for (const auto& p : parts) part_rows.push_back(encoder.Encode(p));

  nn::Mlp generator = gan::CreateGenerator(config.architecture, width, rng);
  std::vector<nn::Mlp> teachers;
  for (int t = 0; t < config.teachers; ++t) {
    teachers.push_back(gan::CreateDiscriminator(config.architecture, width,
                                                nn::Activation::kIdentity, rng));
  }
  nn::Mlp student = gan::CreateDiscriminator(config.architecture, width,
                                             nn::Activation::kIdentity, rng);

  const nn::AdamOptions base{.beta1 = 0.5};
  auto with_lr = [&](double lr) {
    nn::AdamOptions o = base;
    o.learning_rate = lr;
    return o;
  };
  nn::Adam generator_opt(with_lr(config.generator_learning_rate));
  nn::Adam student_opt(with_lr(config.student_learning_rate));
  std::vector<nn::Adam> teacher_opt(config.teachers,
                                    nn::Adam(with_lr(config.teacher_learning_rate)));

  const std::size_t b = static_cast<std::size_t>(config.batch_size);
  const std::int64_t limit = config.max_iterations * config.student_steps *
                             static_cast<std::int64_t>(b);
  const std::int64_t planned =
      config.target_queries > 0 ? config.target_queries : std::max<std::int64_t>(limit, 1);
  double scale = 0.0;
  if (private_run) {
    scale = config.vote_scale ? *config.vote_scale
                              : CalibrateVoteScale(planned, config.budget);
  }
  const std::int64_t allowed =
      private_run ? MaxQueries(scale, config.budget, limit) : limit;
  const double delta =
      config.budget.delta > 0.0 ? config.budget.delta : dp::kDefaultGanDelta;

  dp::Accountant accountant;
  std::vector<gan::TrainingLogEntry> log;
  std::int64_t queries = 0;
  std::int64_t teacher_updates = 0;
  std::int64_t student_updates = 0;
  std::int64_t iteration = 0;
  std::vector<int> votes(config.teachers);
  while (iteration < config.max_iterations && queries < allowed) {
    // Teachers: real rows of their own partition against fresh fakes.
    double teacher_loss = 0.0;
    for (int t = 0; t < config.teachers; ++t) {
      const nn::Matrix& own = part_rows[t];
      const std::size_t m = std::min<std::size_t>(b, own.rows());
      for (int s = 0; s < config.teacher_steps; ++s) {
        const nn::Matrix real = Rows(own, gan::SampleBatch(own.rows(), m, rng));
        const nn::Matrix fake =
            gan::RunGenerator(generator, gan::SampleNoise(m, noise_dim, rng),
                              blocks, config.gumbel_temperature, rng)
                .probabilities;
        nn::Matrix x(static_cast<Eigen::Index>(2 * m), width);
        x << real, fake;
        std::vector<double> labels(2 * m, 0.0);
        std::fill(labels.begin(), labels.begin() + m, 1.0);
        teacher_loss += DiscriminatorStep(teachers[t], teacher_opt[t], x, labels);
        ++teacher_updates;
      }
    }
    teacher_loss /= static_cast<double>(config.teachers * config.teacher_steps);

    // Student: generator output only, labelled by the noisy teacher vote.
    double student_loss = 0.0;
    int student_done = 0;
    for (int s = 0; s < config.student_steps && queries < allowed; ++s) {
      const std::size_t m =
          std::min<std::size_t>(b, static_cast<std::size_t>(allowed - queries));
      const nn::Matrix fake =
          gan::RunGenerator(generator, gan::SampleNoise(m, noise_dim, rng), blocks, config.gumbel_temperature, rng)
              .probabilities;
      std::vector<nn::Matrix> opinions;
      opinions.reserve(teachers.size());
      for (const nn::Mlp& t : teachers) opinions.push_back(t.Predict(fake));
      std::vector<double> labels(m);
      for (std::size_t i = 0; i < m; ++i) {
        for (int t = 0; t < config.teachers; ++t) {
          votes[t] = opinions[t](static_cast<Eigen::Index>(i), 0) > 0.0 ? 1 : 0;
        }
        labels[i] = NoisyVote(votes, scale, rng);
      }
      queries += static_cast<std::int64_t>(m);
      if (private_run) {
        accountant.AddLaplaceVote(scale, static_cast<std::int64_t>(m),
                                  kVoteSensitivity);
      }
      student_loss = DiscriminatorStep(student, student_opt, fake, labels);
      ++student_updates;
      ++student_done;
    }
    if (student_done == 0) break;

    // Generator: non-saturating loss against the student.
    const gan::GeneratorPass pass =
        gan::RunGenerator(generator, gan::SampleNoise(b, noise_dim, rng), blocks, config.gumbel_temperature, rng);
    const nn::ForwardCache cache = student.Forward(pass.probabilities);
    nn::Matrix logit_grad;
    const double generator_loss = LogisticLoss(
        cache.output, std::vector<double>(b, 1.0), logit_grad);
    const nn::Matrix input_grad = student.Backward(cache, logit_grad).input;
    generator_opt.Step(generator,
                       gan::GeneratorGradient(generator, pass, input_grad, blocks));
    ++iteration;
    if (iteration % config.log_every == 0 || iteration == config.max_iterations) {
      log.push_back({iteration, 0.5 * (teacher_loss + student_loss),
                     generator_loss, accountant.EpsilonAt(delta)});
    }
  }

  gan::TrainingSummary summary;
  summary.model = "pategan";
  summary.epsilon_target = config.budget.epsilon;
  summary.delta = config.budget.delta;
  summary.epsilon_spent = accountant.EpsilonAt(delta);
  summary.generator_steps = iteration;
  summary.discriminator_steps = teacher_updates + student_updates;
  summary.private_steps = private_run ? queries : 0;
  summary.degenerate = queries == 0;
  summary.student_saw_real_rows = false;
  summary.accountant_json = accountant.ToJson();
  return {gan::GanModel(dataset.schema_ptr(), std::move(generator), noise_dim,
                        std::move(summary)),
          std::move(log), scale};
}

}  // namespace dpsynth::pategan
