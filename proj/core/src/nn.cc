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
#include "dpsynth/nn.h"

#include <algorithm>
#include <cmath>

#include "dpsynth/errors.h"
#include "json.hpp"

namespace dpsynth::nn {
namespace {

Matrix Activate(const Matrix& z, Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return z;
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kLeakyRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
    case Activation::kTanh:
      return z.array().tanh().matrix();
    case Activation::kSigmoid:
      return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
  }
  return z;
}

// Elementwise derivative of the activation, evaluated at pre-activation z.
Matrix Derivative(const Matrix& z, Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return Matrix::Ones(z.rows(), z.cols());
    case Activation::kRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::kLeakyRelu:
      return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
    case Activation::kTanh:
      return z.unaryExpr([](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
    case Activation::kSigmoid:
      return z.unaryExpr([](double v) {
        const double s = 1.0 / (1.0 + std::exp(-v));
        return s * (1.0 - s);
      });
  }
  return z;
}

void CheckGradient(const Mlp& model, const Vector& grad) {
  if (static_cast<std::size_t>(grad.size()) != model.parameter_count()) {
    throw InvalidArgumentError("gradient size does not match the model");
  }
  if (!grad.allFinite()) throw InvalidArgumentError("non-finite gradient");
}

}  // namespace

std::string_view ActivationName(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kLeakyRelu:
      return "leaky_relu";
    case Activation::kTanh:
      return "tanh";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "identity";
}

Activation ParseActivation(std::string_view name) {
  for (Activation a : {Activation::kIdentity, Activation::kRelu,
                       Activation::kLeakyRelu, Activation::kTanh,
                       Activation::kSigmoid}) {
    if (ActivationName(a) == name) return a;
  }
  throw InvalidArgumentError("unknown activation '" + std::string(name) + "'");
}

Vector GradientSet::ExampleNorms() const {
  return per_example.rowwise().norm();
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidArgumentError("MLP needs layers");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.bias.size() != layer.weights.cols()) {
      throw InvalidArgumentError("bias size does not match layer output");
    }
    if (l > 0 && layers_[l - 1].out() != layer.in()) {
      throw InvalidArgumentError("layer dimensions do not chain");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw InvalidArgumentError("non-finite parameters");
    }
  }
}

Mlp Mlp::Create(std::span<const int> dims,
                std::span<const Activation> activations, Rng& rng) {
  if (dims.size() < 2 || activations.size() != dims.size() - 1) {
    throw InvalidArgumentError("need one activation per layer");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    if (in <= 0 || out <= 0) throw InvalidArgumentError("bad layer width");
    const double limit = std::sqrt(6.0 / (in + out));
    DenseLayer layer;
    layer.weights.resize(in, out);
    for (Eigen::Index j = 0; j < out; ++j) {
      for (Eigen::Index i = 0; i < in; ++i) {
        layer.weights(i, j) = (2.0 * rng.Uniform() - 1.0) * limit;
      }
    }
    layer.bias = Vector::Zero(out);
    layer.activation = activations[l];
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers_) {
    n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  }
  return n;
}

ForwardCache Mlp::Forward(const Matrix& batch) const {
  if (batch.cols() != input_dim()) {
    throw InvalidArgumentError("batch width " + std::to_string(batch.cols()) +
                               " does not match input dimension " +
                               std::to_string(input_dim()));
  }
  ForwardCache cache;
  cache.owner = this;
  cache.version = version_;
  cache.inputs.reserve(layers_.size());
  cache.pre.reserve(layers_.size());
  Matrix a = batch;
  for (const DenseLayer& layer : layers_) {
    Matrix z = a * layer.weights;
    z.rowwise() += layer.bias.transpose();
    cache.inputs.push_back(std::move(a));
    a = Activate(z, layer.activation);
    cache.pre.push_back(std::move(z));
  }
  cache.output = std::move(a);
  return cache;
}

Matrix Mlp::Predict(const Matrix& batch) const { return Forward(batch).output; }

GradientSet Mlp::Backward(const ForwardCache& cache, const Matrix& output_grad,
                          bool per_example) const {
  if (cache.owner != this || cache.version != version_ ||
      cache.pre.size() != layers_.size()) {
    throw StateError("stale activation cache: run Forward again");
  }
  const Eigen::Index batch = cache.output.rows();
  if (output_grad.rows() != batch || output_grad.cols() != output_dim()) {
    throw InvalidArgumentError("output gradient has the wrong shape");
  }
  const auto total_params = static_cast<Eigen::Index>(parameter_count());
  GradientSet g;
  g.total.resize(total_params);
  if (per_example) g.per_example.resize(batch, total_params);

  // Offsets of each layer's block in the flat layout.
  std::vector<Eigen::Index> offsets(layers_.size());
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    offsets[l] = off;
    off += layers_[l].weights.size() + layers_[l].bias.size();
  }

  Matrix delta =
      output_grad.cwiseProduct(Derivative(cache.pre.back(), layers_.back().activation));
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const DenseLayer& layer = layers_[li];
    const Matrix& a = cache.inputs[li];
    const Eigen::Index in = layer.in();
    const Eigen::Index out = layer.out();
    const Eigen::Index w_off = offsets[li];
    const Eigen::Index b_off = w_off + in * out;
    Eigen::Map<Matrix>(g.total.data() + w_off, in, out) = a.transpose() * delta;
    g.total.segment(b_off, out) = delta.colwise().sum().transpose();
    if (per_example) {
      for (Eigen::Index i = 0; i < batch; ++i) {
        double* row = g.per_example.data() + i * total_params;
        Eigen::Map<Matrix>(row + w_off, in, out).noalias() =
            a.row(i).transpose() * delta.row(i);
        Eigen::Map<Eigen::RowVectorXd>(row + b_off, out) = delta.row(i);
      }
    }
    Matrix upstream = delta * layer.weights.transpose();
    if (li == 0) {
      g.input = std::move(upstream);
    } else {
      delta = upstream.cwiseProduct(
          Derivative(cache.pre[li - 1], layers_[li - 1].activation));
    }
  }
  return g;
}

Vector Mlp::Parameters() const {
  Vector p(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index off = 0;
  for (const DenseLayer& l : layers_) {
    p.segment(off, l.weights.size()) =
        Eigen::Map<const Vector>(l.weights.data(), l.weights.size());
    off += l.weights.size();
    p.segment(off, l.bias.size()) = l.bias;
    off += l.bias.size();
  }
  return p;
}

void Mlp::SetParameters(const Vector& params) {
  if (static_cast<std::size_t>(params.size()) != parameter_count()) {
    throw InvalidArgumentError("parameter vector has the wrong size");
  }
  if (!params.allFinite()) throw InvalidArgumentError("non-finite parameters");
  Eigen::Index off = 0;
  for (DenseLayer& l : layers_) {
    Eigen::Map<Vector>(l.weights.data(), l.weights.size()) =
        params.segment(off, l.weights.size());
    off += l.weights.size();
    l.bias = params.segment(off, l.bias.size());
    off += l.bias.size();
  }
  ++version_;
}

void Mlp::AddToParameters(const Vector& delta) {
  SetParameters(Parameters() + delta);
}

void Mlp::ClipWeights(double c) {
  for (DenseLayer& l : layers_) {
    l.weights = l.weights.cwiseMax(-c).cwiseMin(c);
    l.bias = l.bias.cwiseMax(-c).cwiseMin(c);
  }
  ++version_;
}

double Mlp::MaxAbsParameter() const {
  double m = 0.0;
  for (const DenseLayer& l : layers_) {
    m = std::max({m, l.weights.cwiseAbs().maxCoeff(), l.bias.cwiseAbs().maxCoeff()});
  }
  return m;
}

std::string Mlp::ToJson() const {
  nlohmann::json j;
  j["format"] = "dpsynth.mlp";
  j["version"] = 1;
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseLayer& l : layers_) {
    std::vector<double> w(l.weights.data(), l.weights.data() + l.weights.size());
    std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
    layers.push_back({{"in", l.in()},
                      {"out", l.out()},
                      {"activation", ActivationName(l.activation)},
                      {"weights", w},
                      {"bias", b}});
  }
  j["layers"] = std::move(layers);
  return j.dump();
}

Mlp Mlp::FromJson(std::string_view text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "dpsynth.mlp" || j.value("version", 0) != 1) {
      throw InvalidArgumentError("not a version 1 dpsynth MLP");
    }
    std::vector<DenseLayer> layers;
    for (const auto& jl : j.at("layers")) {
      const int in = jl.at("in").get<int>();
      const int out = jl.at("out").get<int>();
      const auto w = jl.at("weights").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (static_cast<int>(w.size()) != in * out ||
          static_cast<int>(b.size()) != out) {
        throw InvalidArgumentError("layer arrays do not match their shape");
      }
      DenseLayer layer;
      layer.weights = Eigen::Map<const Matrix>(w.data(), in, out);
      layer.bias = Eigen::Map<const Vector>(b.data(), out);
      layer.activation = ParseActivation(jl.at("activation").get<std::string>());
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgumentError(std::string("malformed MLP JSON: ") + e.what());
  }
}

void ClipPerExample(GradientSet& grads, double clip_norm) {
  if (!grads.has_per_example()) {
    throw StateError("per-example gradients are required for clipping");
  }
  if (!(clip_norm > 0.0)) throw InvalidArgumentError("clip norm must be positive");
  if (std::isinf(clip_norm)) return;
  for (Eigen::Index i = 0; i < grads.per_example.rows(); ++i) {
    const double norm = grads.per_example.row(i).norm();
    if (norm > clip_norm) grads.per_example.row(i) *= clip_norm / norm;
  }
  grads.total = grads.per_example.colwise().sum().transpose();
}

void Sgd::Step(Mlp& model, const Vector& grad) {
  CheckGradient(model, grad);
  if (options_.learning_rate == 0.0) return;
  model.AddToParameters(-options_.learning_rate * grad);
}

void Adam::Step(Mlp& model, const Vector& grad) {
  CheckGradient(model, grad);
  if (m_.size() == 0) {
    m_ = Vector::Zero(grad.size());
    v_ = Vector::Zero(grad.size());
  }
  ++t_;
  const AdamOptions& o = options_;
  m_ = o.beta1 * m_ + (1.0 - o.beta1) * grad;
  v_ = o.beta2 * v_ + (1.0 - o.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t_));
  const Vector step =
      (m_ / c1).array() / ((v_ / c2).array().sqrt() + o.epsilon);
  model.AddToParameters(-o.learning_rate * step);
}

Matrix BlockSoftmax(const Matrix& logits, std::span<const int> block_sizes) {
  Matrix out(logits.rows(), logits.cols());
  Eigen::Index col = 0;
  for (int size : block_sizes) {
    auto block = logits.middleCols(col, size);
    const Eigen::VectorXd mx = block.rowwise().maxCoeff();
    Matrix e = (block.colwise() - mx).array().exp().matrix();
    const Eigen::VectorXd sum = e.rowwise().sum();
    out.middleCols(col, size) = e.array().colwise() / sum.array();
    col += size;
  }
  if (col != logits.cols()) {
    throw InvalidArgumentError("softmax blocks do not cover the columns");
  }
  return out;
}

Matrix BlockSoftmaxBackward(const Matrix& probs, const Matrix& grad,
                            std::span<const int> block_sizes) {
  Matrix out(probs.rows(), probs.cols());
  Eigen::Index col = 0;
  for (int size : block_sizes) {
    auto p = probs.middleCols(col, size);
    auto g = grad.middleCols(col, size);
    // J^T g = p * (g - <p, g>)
    const Eigen::VectorXd dot = p.cwiseProduct(g).rowwise().sum();
    out.middleCols(col, size) =
        p.array() * (g.colwise() - dot).array();
    col += size;
  }
  return out;
}

}  // namespace dpsynth::nn
