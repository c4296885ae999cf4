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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "dpsynth/errors.h"
#include "dpsynth/format.h"
#include "json.hpp"

namespace dpsynth::gan {

OneHotEncoder::OneHotEncoder(std::shared_ptr<const data::Schema> schema)
    : schema_(std::move(schema)) {
  if (!schema_) throw InvalidArgumentError("encoder needs a schema");
  for (std::size_t c = 0; c < schema_->size(); ++c) {
    offsets_.push_back(width_);
    block_sizes_.push_back(schema_->DomainSize(c));
    width_ += block_sizes_.back();
  }
}

nn::Matrix OneHotEncoder::Encode(const data::TabularDataset& dataset) const {
  std::vector<std::size_t> rows(dataset.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return Encode(dataset, rows);
}

nn::Matrix OneHotEncoder::Encode(const data::TabularDataset& dataset,
                                 std::span<const std::size_t> rows) const {
  if (!(dataset.schema() == *schema_)) {
    throw InvalidArgumentError("dataset schema differs from the encoder's");
  }
  nn::Matrix x = nn::Matrix::Zero(static_cast<Eigen::Index>(rows.size()), width_);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = dataset.row(rows[i]);
    for (std::size_t c = 0; c < row.size(); ++c) {
      x(static_cast<Eigen::Index>(i), offsets_[c] + row[c]) = 1.0;
    }
  }
  return x;
}

data::TabularDataset OneHotEncoder::Sample(const nn::Matrix& probabilities,
                                           Rng& rng,
                                           data::Provenance provenance) const {
  if (probabilities.cols() != width_ || probabilities.rows() < 1) {
    throw InvalidArgumentError("probability matrix has the wrong shape");
  }
  const std::size_t d = block_sizes_.size();
  std::vector<std::int32_t> cells(static_cast<std::size_t>(probabilities.rows()) * d);
  for (Eigen::Index r = 0; r < probabilities.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double u = rng.Uniform();
      double acc = 0.0;
      int value = block_sizes_[c] - 1;
      for (int v = 0; v < block_sizes_[c]; ++v) {
        acc += probabilities(r, offsets_[c] + v);
        if (u < acc) {
          value = v;
          break;
        }
      }
      cells[static_cast<std::size_t>(r) * d + c] = value;
    }
  }
  return data::TabularDataset(schema_, std::move(cells), provenance);
}

nn::Mlp CreateGenerator(const Architecture& arch, int output_dim, Rng& rng) {
  std::vector<int> dims = {arch.noise_dim};
  std::vector<nn::Activation> acts;
  for (int h : arch.generator_hidden) {
    dims.push_back(h);
    acts.push_back(nn::Activation::kRelu);
  }
  dims.push_back(output_dim);
  acts.push_back(nn::Activation::kIdentity);
  return nn::Mlp::Create(dims, acts, rng);
}

nn::Mlp CreateDiscriminator(const Architecture& arch, int input_dim,
                            nn::Activation output, Rng& rng) {
  std::vector<int> dims = {input_dim};
  std::vector<nn::Activation> acts;
  for (int h : arch.discriminator_hidden) {
    dims.push_back(h);
    acts.push_back(nn::Activation::kLeakyRelu);
  }
  dims.push_back(1);
  acts.push_back(output);
  return nn::Mlp::Create(dims, acts, rng);
}

nn::Matrix SampleNoise(std::size_t rows, int dim, Rng& rng) {
  nn::Matrix z(static_cast<Eigen::Index>(rows), dim);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = rng.Normal();
  }
  return z;
}

GeneratorPass RunGenerator(const nn::Mlp& generator, const nn::Matrix& noise,
                           std::span<const int> block_sizes) {
  GeneratorPass pass;
  pass.cache = generator.Forward(noise);
  pass.probabilities = nn::BlockSoftmax(pass.cache.output, block_sizes);
  return pass;
}

GeneratorPass RunGenerator(const nn::Mlp& generator, const nn::Matrix& noise,
                           std::span<const int> block_sizes, double temperature,
                           Rng& rng) {
  if (!(temperature > 0.0)) return RunGenerator(generator, noise, block_sizes);
  GeneratorPass pass;
  pass.cache = generator.Forward(noise);
  pass.temperature = temperature;
  nn::Matrix logits = pass.cache.output;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      logits(r, c) = (logits(r, c) - std::log(-std::log(rng.UniformPositive()))) /
                     temperature;
    }
  }
  pass.probabilities = nn::BlockSoftmax(logits, block_sizes);
  return pass;
}

nn::Vector GeneratorGradient(const nn::Mlp& generator, const GeneratorPass& pass,
                             const nn::Matrix& prob_grad,
                             std::span<const int> block_sizes) {
  nn::Matrix logit_grad =
      nn::BlockSoftmaxBackward(pass.probabilities, prob_grad, block_sizes);
  if (pass.temperature != 1.0) logit_grad /= pass.temperature;
  return generator.Backward(pass.cache, logit_grad).total;
}

void WriteTrainingLog(const std::vector<TrainingLogEntry>& log,
                      std::ostream& out) {
  out << "iteration,discriminator_loss,generator_loss,epsilon_spent\n";
  for (const TrainingLogEntry& e : log) {
    out << e.iteration << ',' << FormatDouble(e.discriminator_loss) << ','
        << FormatDouble(e.generator_loss) << ','
        << FormatDouble(e.epsilon_spent) << '\n';
  }
}

GanModel::GanModel(std::shared_ptr<const data::Schema> schema,
                   nn::Mlp generator, int noise_dim, TrainingSummary summary)
    : encoder_(std::move(schema)),
      generator_(std::move(generator)),
      noise_dim_(noise_dim),
      summary_(std::move(summary)) {
  if (generator_.layers().empty() || generator_.input_dim() != noise_dim_ ||
      generator_.output_dim() != encoder_.width()) {
    throw InvalidArgumentError("generator does not match the schema encoding");
  }
}

data::TabularDataset GanModel::Generate(std::size_t m, Rng& rng) const {
  if (m == 0) throw InvalidArgumentError("sample size must be at least 1");
  // Chunking keeps peak memory flat for large m.
  constexpr std::size_t kChunk = 4096;
  std::vector<std::int32_t> cells;
  cells.reserve(m * encoder_.schema().size());
  for (std::size_t done = 0; done < m; done += kChunk) {
    const std::size_t rows = std::min(kChunk, m - done);
    const nn::Matrix z = SampleNoise(rows, noise_dim_, rng);
    const nn::Matrix p =
        nn::BlockSoftmax(generator_.Predict(z), encoder_.block_sizes());
    const data::TabularDataset part = encoder_.Sample(p, rng);
    cells.insert(cells.end(), part.cells().begin(), part.cells().end());
  }
  return data::TabularDataset(encoder_.schema_ptr(), std::move(cells),
                              data::Provenance::kSynthetic);
}

std::string GanModel::ToJson() const {
  nlohmann::json j;
  j["format"] = "dpsynth.gan";
  j["version"] = 1;
  j["schema"] = nlohmann::json::parse(encoder_.schema().ToJson());
  j["noise_dim"] = noise_dim_;
  j["generator"] = nlohmann::json::parse(generator_.ToJson());
  const TrainingSummary& s = summary_;
  j["summary"] = {{"model", s.model},
                  {"epsilon_target", FormatDouble(s.epsilon_target)},
                  {"delta", FormatDouble(s.delta)},
                  {"epsilon_spent", FormatDouble(s.epsilon_spent)},
                  {"generator_steps", s.generator_steps},
                  {"discriminator_steps", s.discriminator_steps},
                  {"private_steps", s.private_steps},
                  {"degenerate", s.degenerate},
                  {"student_saw_real_rows", s.student_saw_real_rows}};
  if (!s.accountant_json.empty()) {
    j["summary"]["accountant"] = nlohmann::json::parse(s.accountant_json);
  }
  return j.dump();
}

GanModel GanModel::FromJson(std::string_view text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "dpsynth.gan" || j.value("version", 0) != 1) {
      throw InvalidArgumentError("not a version 1 dpsynth GAN model");
    }
    auto schema = std::make_shared<const data::Schema>(
        data::Schema::FromJson(j.at("schema").dump()));
    const nlohmann::json& js = j.at("summary");
    TrainingSummary s;
    s.model = js.at("model").get<std::string>();
    s.epsilon_target = ParseDouble(js.at("epsilon_target").get<std::string>());
    s.delta = ParseDouble(js.at("delta").get<std::string>());
    s.epsilon_spent = ParseDouble(js.at("epsilon_spent").get<std::string>());
    s.generator_steps = js.at("generator_steps").get<std::int64_t>();
    s.discriminator_steps = js.at("discriminator_steps").get<std::int64_t>();
    s.private_steps = js.at("private_steps").get<std::int64_t>();
    s.degenerate = js.at("degenerate").get<bool>();
    s.student_saw_real_rows = js.at("student_saw_real_rows").get<bool>();
    if (js.contains("accountant")) s.accountant_json = js.at("accountant").dump();
    return GanModel(std::move(schema),
                    nn::Mlp::FromJson(j.at("generator").dump()),
                    j.at("noise_dim").get<int>(), std::move(s));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgumentError(std::string("malformed GAN JSON: ") + e.what());
  }
}

std::vector<std::size_t> SampleBatch(std::size_t n, std::size_t size, Rng& rng) {
  if (size == 0 || size > n) {
    throw InvalidArgumentError("batch size must be in [1, n]");
  }
  // Floyd's algorithm: `size` distinct draws without materializing [0, n).
  std::unordered_set<std::size_t> seen;
  std::vector<std::size_t> out;
  out.reserve(size);
  for (std::size_t j = n - size; j < n; ++j) {
    const std::size_t t = rng.UniformIndex(j + 1);
    if (seen.insert(t).second) {
      out.push_back(t);
    } else {
      seen.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

}  // namespace dpsynth::gan
