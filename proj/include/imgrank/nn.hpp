// Copyright 2026 The imgrank Authors.
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

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "imgrank/types.hpp"

namespace imgrank::nn {

enum class LayerKind { kDense, kConv1d, kMaxPool, kRelu, kTanh };

/// Layer shapes. Activations are flat; convolutional activations are laid
/// out channel-major as [channel][position].
struct Layer {
  LayerKind kind = LayerKind::kDense;
  std::size_t in_size = 0;
  std::size_t out_size = 0;
  /// Conv1d and MaxPool geometry.
  std::size_t channels_in = 0;
  std::size_t channels_out = 0;
  std::size_t length_in = 0;
  std::size_t width = 0;
  std::size_t param_offset = 0;
  std::size_t param_count = 0;

  bool operator==(const Layer&) const = default;
};

/// Activations and scratch buffers for one forward/backward pass.
struct Workspace {
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> deltas;
  std::vector<std::vector<std::uint32_t>> argmax;
};

/// Small sequential network over a flat parameter vector.
class Network {
 public:
  Network() = default;
  explicit Network(std::size_t input_size) : input_size_(input_size) {}

  Network& dense(std::size_t out);
  /// Valid 1-D convolution; the current activation is read as
  /// `channels_in` channels of equal length.
  Network& conv1d(std::size_t channels_in, std::size_t channels_out, std::size_t width);
  Network& maxpool(std::size_t channels, std::size_t size);
  Network& relu();
  Network& tanh();

  std::size_t input_size() const { return input_size_; }
  std::size_t output_size() const;
  std::size_t num_params() const { return params_.size(); }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  /// Uniform fan-in scaled weights, zero biases.
  void init(std::uint64_t seed);

  std::span<const double> forward(std::span<const double> x, Workspace& ws) const;
  /// Back-propagates `dout` through the activations left in `ws` by the
  /// last forward call and adds parameter gradients into `grad`.
  void backward(Workspace& ws, std::span<const double> dout, std::span<double> grad) const;

  Json to_json() const;
  static Network from_json(const Json& j);
  bool operator==(const Network&) const = default;

 private:
  std::size_t current_size() const;
  Layer& push(Layer layer);

  std::size_t input_size_ = 0;
  std::vector<Layer> layers_;
  std::vector<double> params_;
};

/// Softmax of `logits` into `probs`.
void softmax(std::span<const double> logits, std::span<double> probs);

/// Cross entropy of softmax(logits) against class `label` (0-based); writes
/// d loss / d logits.
double softmax_cross_entropy(std::span<const double> logits, std::size_t label,
                             std::span<double> dlogits);

/// ln(1 + exp(-d)) computed without overflow.
double softplus_neg(double d);
double sigmoid(double x);

/// Pair cross entropy with target 1 for a preferred/other pair: its value
/// and parameter gradient (added into `grad`).
double pair_loss_and_grad(const Network& net, std::span<const double> preferred,
                          std::span<const double> other, std::span<double> grad,
                          Workspace& ws_a, Workspace& ws_b);

/// Softmax cross entropy for one instance and its parameter gradient.
double class_loss_and_grad(const Network& net, std::span<const double> x, std::size_t label,
                           std::span<double> grad, Workspace& ws);

}  // namespace imgrank::nn
