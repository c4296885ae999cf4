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
// Dense multilayer perceptrons with batch and per-example gradients, enough
// to train small tabular GANs with DP-SGD. Batches are row-major in the
// sense that one example is one row.
#ifndef DPSYNTH_NN_H_
#define DPSYNTH_NN_H_

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsynth/rng.h"

namespace dpsynth::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { kIdentity, kRelu, kLeakyRelu, kTanh, kSigmoid };

inline constexpr double kLeakySlope = 0.2;

std::string_view ActivationName(Activation a);
Activation ParseActivation(std::string_view name);

struct DenseLayer {
  Matrix weights;  // in x out
  Vector bias;     // out
  Activation activation = Activation::kIdentity;

  int in() const { return static_cast<int>(weights.rows()); }
  int out() const { return static_cast<int>(weights.cols()); }
};

// Activations retained by Forward for the matching Backward call.
struct ForwardCache {
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  Matrix output;
  const void* owner = nullptr;
  std::uint64_t version = 0;
};

// Gradients in the flat parameter layout of Mlp::Parameters(): for each layer
// the weight matrix in column-major order followed by the bias.
struct GradientSet {
  Vector total;            // summed over the batch
  RowMatrix per_example;   // batch x parameters; empty for batch-only calls
  Matrix input;            // d loss / d input, batch x input_dim

  bool has_per_example() const { return per_example.size() > 0; }
  // L2 norm of each example's concatenated gradient.
  Vector ExampleNorms() const;
};

class Mlp {
 public:
  Mlp() = default;
  // Throws InvalidArgumentError when layer dimensions do not chain.
  explicit Mlp(std::vector<DenseLayer> layers);

  // dims = {input, hidden..., output}; one activation per layer. Weights are
  // Glorot-uniform, biases zero.
  static Mlp Create(std::span<const int> dims,
                    std::span<const Activation> activations, Rng& rng);

  int input_dim() const { return layers_.front().in(); }
  int output_dim() const { return layers_.back().out(); }
  std::size_t parameter_count() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }

  ForwardCache Forward(const Matrix& batch) const;
  Matrix Predict(const Matrix& batch) const;

  // Backpropagates d loss / d output (batch x output_dim). The cache must
  // come from Forward on this object with unchanged parameters, otherwise
  // StateError is thrown.
  GradientSet Backward(const ForwardCache& cache, const Matrix& output_grad,
                       bool per_example = false) const;
  GradientSet BackwardPerExample(const ForwardCache& cache,
                                 const Matrix& output_grad) const {
    return Backward(cache, output_grad, true);
  }

  Vector Parameters() const;
  void SetParameters(const Vector& params);
  // params += delta
  void AddToParameters(const Vector& delta);
  // Clamps every weight and bias into [-c, c] (WGAN critic constraint).
  void ClipWeights(double c);
  double MaxAbsParameter() const;

  std::uint64_t version() const { return version_; }

  std::string ToJson() const;
  static Mlp FromJson(std::string_view text);

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t version_ = 0;
};

// Rescales each example's gradient by min(1, clip_norm / ||g||) and recomputes
// the total from the clipped rows. Requires per-example gradients.
void ClipPerExample(GradientSet& grads, double clip_norm);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  // Descends along `grad`. Throws InvalidArgumentError on non-finite input
  // or a size mismatch, leaving the model untouched.
  virtual void Step(Mlp& model, const Vector& grad) = 0;
};

struct SgdOptions {
  double learning_rate = 0.01;
};

class Sgd : public Optimizer {
 public:
  explicit Sgd(SgdOptions options) : options_(options) {}
  void Step(Mlp& model, const Vector& grad) override;

 private:
  SgdOptions options_;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam : public Optimizer {
 public:
  explicit Adam(AdamOptions options) : options_(options) {}
  void Step(Mlp& model, const Vector& grad) override;
  std::int64_t steps() const { return t_; }

 private:
  AdamOptions options_;
  Vector m_;
  Vector v_;
  std::int64_t t_ = 0;
};

// Softmax applied independently to consecutive column blocks.
Matrix BlockSoftmax(const Matrix& logits, std::span<const int> block_sizes);
// Given softmax outputs and d loss / d probs, returns d loss / d logits.
Matrix BlockSoftmaxBackward(const Matrix& probs, const Matrix& grad,
                            std::span<const int> block_sizes);

}  // namespace dpsynth::nn

#endif  // DPSYNTH_NN_H_
