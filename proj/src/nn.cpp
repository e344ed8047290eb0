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

#include "imgrank/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace imgrank::nn {

namespace {

std::string_view kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kDense:
      return "dense";
    case LayerKind::kConv1d:
      return "conv1d";
    case LayerKind::kMaxPool:
      return "maxpool";
    case LayerKind::kRelu:
      return "relu";
    case LayerKind::kTanh:
      return "tanh";
  }
  return "dense";
}

LayerKind parse_kind(const std::string& s) {
  for (auto k : {LayerKind::kDense, LayerKind::kConv1d, LayerKind::kMaxPool, LayerKind::kRelu,
                 LayerKind::kTanh}) {
    if (kind_name(k) == s) return k;
  }
  throw DataError("unknown layer kind '" + s + "'");
}

}  // namespace

std::size_t Network::current_size() const {
  return layers_.empty() ? input_size_ : layers_.back().out_size;
}

std::size_t Network::output_size() const { return current_size(); }

Layer& Network::push(Layer layer) {
  layer.param_offset = params_.size();
  params_.resize(params_.size() + layer.param_count, 0.0);
  layers_.push_back(layer);
  return layers_.back();
}

Network& Network::dense(std::size_t out) {
  Layer l;
  l.kind = LayerKind::kDense;
  l.in_size = current_size();
  l.out_size = out;
  l.param_count = l.in_size * out + out;
  push(l);
  return *this;
}

Network& Network::conv1d(std::size_t channels_in, std::size_t channels_out, std::size_t width) {
  const std::size_t in = current_size();
  if (channels_in == 0 || in % channels_in != 0) {
    throw ConfigError("conv1d input does not divide into channels");
  }
  const std::size_t len = in / channels_in;
  if (width == 0 || len < width) {
    throw ConfigError("input of length " + std::to_string(len) +
                      " is shorter than the convolution width " + std::to_string(width));
  }
  Layer l;
  l.kind = LayerKind::kConv1d;
  l.in_size = in;
  l.channels_in = channels_in;
  l.channels_out = channels_out;
  l.length_in = len;
  l.width = width;
  l.out_size = channels_out * (len - width + 1);
  l.param_count = channels_out * channels_in * width + channels_out;
  push(l);
  return *this;
}

Network& Network::maxpool(std::size_t channels, std::size_t size) {
  const std::size_t in = current_size();
  if (channels == 0 || in % channels != 0) throw ConfigError("maxpool channel mismatch");
  const std::size_t len = in / channels;
  if (size == 0 || len < size) {
    throw ConfigError("input of length " + std::to_string(len) +
                      " is shorter than the pooling size " + std::to_string(size));
  }
  Layer l;
  l.kind = LayerKind::kMaxPool;
  l.in_size = in;
  l.channels_in = channels;
  l.channels_out = channels;
  l.length_in = len;
  l.width = size;
  l.out_size = channels * (len / size);
  push(l);
  return *this;
}

Network& Network::relu() {
  Layer l;
  l.kind = LayerKind::kRelu;
  l.in_size = l.out_size = current_size();
  push(l);
  return *this;
}

Network& Network::tanh() {
  Layer l;
  l.kind = LayerKind::kTanh;
  l.in_size = l.out_size = current_size();
  push(l);
  return *this;
}

void Network::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::fill(params_.begin(), params_.end(), 0.0);
  for (const auto& l : layers_) {
    std::size_t fan_in = 0;
    std::size_t n_weights = 0;
    if (l.kind == LayerKind::kDense) {
      fan_in = l.in_size;
      n_weights = l.in_size * l.out_size;
    } else if (l.kind == LayerKind::kConv1d) {
      fan_in = l.channels_in * l.width;
      n_weights = l.channels_out * l.channels_in * l.width;
    } else {
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t k = 0; k < n_weights; ++k) params_[l.param_offset + k] = dist(rng);
  }
}

std::span<const double> Network::forward(std::span<const double> x, Workspace& ws) const {
  if (x.size() != input_size_) {
    throw DataError("network expects " + std::to_string(input_size_) + " inputs, got " +
                    std::to_string(x.size()));
  }
  ws.acts.resize(layers_.size() + 1);
  ws.argmax.resize(layers_.size());
  ws.acts[0].assign(x.begin(), x.end());
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const auto& l = layers_[li];
    const auto& in = ws.acts[li];
    auto& out = ws.acts[li + 1];
    out.assign(l.out_size, 0.0);
    const double* p = params_.data() + l.param_offset;
    switch (l.kind) {
      case LayerKind::kDense: {
        const double* b = p + l.in_size * l.out_size;
        for (std::size_t o = 0; o < l.out_size; ++o) {
          const double* w = p + o * l.in_size;
          double s = b[o];
          for (std::size_t i = 0; i < l.in_size; ++i) s += w[i] * in[i];
          out[o] = s;
        }
        break;
      }
      case LayerKind::kConv1d: {
        const std::size_t len_out = l.length_in - l.width + 1;
        const double* b = p + l.channels_out * l.channels_in * l.width;
        for (std::size_t oc = 0; oc < l.channels_out; ++oc) {
          for (std::size_t t = 0; t < len_out; ++t) {
            double s = b[oc];
            for (std::size_t ic = 0; ic < l.channels_in; ++ic) {
              const double* w = p + (oc * l.channels_in + ic) * l.width;
              const double* xin = in.data() + ic * l.length_in + t;
              for (std::size_t k = 0; k < l.width; ++k) s += w[k] * xin[k];
            }
            out[oc * len_out + t] = s;
          }
        }
        break;
      }
      case LayerKind::kMaxPool: {
        const std::size_t len_out = l.length_in / l.width;
        auto& am = ws.argmax[li];
        am.assign(l.out_size, 0);
        for (std::size_t c = 0; c < l.channels_in; ++c) {
          for (std::size_t t = 0; t < len_out; ++t) {
            std::size_t best = c * l.length_in + t * l.width;
            for (std::size_t k = 1; k < l.width; ++k) {
              const std::size_t idx = c * l.length_in + t * l.width + k;
              if (in[idx] > in[best]) best = idx;
            }
            out[c * len_out + t] = in[best];
            am[c * len_out + t] = static_cast<std::uint32_t>(best);
          }
        }
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < l.out_size; ++i) out[i] = std::max(0.0, in[i]);
        break;
      case LayerKind::kTanh:
        for (std::size_t i = 0; i < l.out_size; ++i) out[i] = std::tanh(in[i]);
        break;
    }
  }
  return ws.acts.back();
}

void Network::backward(Workspace& ws, std::span<const double> dout, std::span<double> grad) const {
  ws.deltas.resize(layers_.size() + 1);
  ws.deltas.back().assign(dout.begin(), dout.end());
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& l = layers_[li];
    const auto& in = ws.acts[li];
    const auto& out = ws.acts[li + 1];
    const auto& d = ws.deltas[li + 1];
    auto& din = ws.deltas[li];
    din.assign(l.in_size, 0.0);
    const double* p = params_.data() + l.param_offset;
    double* g = grad.data() + l.param_offset;
    switch (l.kind) {
      case LayerKind::kDense: {
        double* gb = g + l.in_size * l.out_size;
        for (std::size_t o = 0; o < l.out_size; ++o) {
          const double* w = p + o * l.in_size;
          double* gw = g + o * l.in_size;
          const double dv = d[o];
          gb[o] += dv;
          if (dv == 0.0) continue;
          for (std::size_t i = 0; i < l.in_size; ++i) {
            gw[i] += dv * in[i];
            din[i] += dv * w[i];
          }
        }
        break;
      }
      case LayerKind::kConv1d: {
        const std::size_t len_out = l.length_in - l.width + 1;
        double* gb = g + l.channels_out * l.channels_in * l.width;
        for (std::size_t oc = 0; oc < l.channels_out; ++oc) {
          for (std::size_t t = 0; t < len_out; ++t) {
            const double dv = d[oc * len_out + t];
            gb[oc] += dv;
            if (dv == 0.0) continue;
            for (std::size_t ic = 0; ic < l.channels_in; ++ic) {
              const std::size_t woff = (oc * l.channels_in + ic) * l.width;
              const std::size_t xoff = ic * l.length_in + t;
              for (std::size_t k = 0; k < l.width; ++k) {
                g[woff + k] += dv * in[xoff + k];
                din[xoff + k] += dv * p[woff + k];
              }
            }
          }
        }
        break;
      }
      case LayerKind::kMaxPool: {
        const auto& am = ws.argmax[li];
        for (std::size_t o = 0; o < l.out_size; ++o) din[am[o]] += d[o];
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < l.in_size; ++i) din[i] = in[i] > 0.0 ? d[i] : 0.0;
        break;
      case LayerKind::kTanh:
        for (std::size_t i = 0; i < l.in_size; ++i) din[i] = d[i] * (1.0 - out[i] * out[i]);
        break;
    }
  }
}

Json Network::to_json() const {
  Json layers = Json::array();
  for (const auto& l : layers_) {
    Json jl{{"kind", kind_name(l.kind)}, {"out", l.out_size}};
    if (l.kind == LayerKind::kConv1d) {
      jl["channels_in"] = l.channels_in;
      jl["width"] = l.width;
      jl["out"] = l.channels_out;
    } else if (l.kind == LayerKind::kMaxPool) {
      jl["channels_in"] = l.channels_in;
      jl["width"] = l.width;
    }
    layers.push_back(std::move(jl));
  }
  return Json{{"input_size", input_size_}, {"layers", std::move(layers)}, {"params", params_}};
}

Network Network::from_json(const Json& j) {
  try {
    Network net(j.at("input_size").get<std::size_t>());
    for (const auto& jl : j.at("layers")) {
      switch (parse_kind(jl.at("kind").get<std::string>())) {
        case LayerKind::kDense:
          net.dense(jl.at("out").get<std::size_t>());
          break;
        case LayerKind::kConv1d:
          net.conv1d(jl.at("channels_in").get<std::size_t>(), jl.at("out").get<std::size_t>(),
                     jl.at("width").get<std::size_t>());
          break;
        case LayerKind::kMaxPool:
          net.maxpool(jl.at("channels_in").get<std::size_t>(), jl.at("width").get<std::size_t>());
          break;
        case LayerKind::kRelu:
          net.relu();
          break;
        case LayerKind::kTanh:
          net.tanh();
          break;
      }
    }
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != net.num_params()) {
      throw DataError("network has " + std::to_string(params.size()) + " parameters, expected " +
                      std::to_string(net.num_params()));
    }
    net.params_ = std::move(params);
    return net;
  } catch (const Json::exception& e) {
    throw DataError(std::string("network: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

void softmax(std::span<const double> logits, std::span<double> probs) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - m);
    z += probs[k];
  }
  for (auto& p : probs) p /= z;
}

double softmax_cross_entropy(std::span<const double> logits, std::size_t label,
                             std::span<double> dlogits) {
  softmax(logits, dlogits);
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double loss = -(logits[label] - m - std::log(z));
  dlogits[label] -= 1.0;
  return loss;
}

double softplus_neg(double d) {
  return d > 0.0 ? std::log1p(std::exp(-d)) : -d + std::log1p(std::exp(d));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double pair_loss_and_grad(const Network& net, std::span<const double> preferred,
                          std::span<const double> other, std::span<double> grad,
                          Workspace& ws_a, Workspace& ws_b) {
  const double sa = net.forward(preferred, ws_a)[0];
  const double sb = net.forward(other, ws_b)[0];
  const double d = sa - sb;
  // d/dd ln(1 + e^{-d}) = -sigmoid(-d).
  const double g = -sigmoid(-d);
  const double ga[1] = {g};
  const double gb[1] = {-g};
  net.backward(ws_a, ga, grad);
  net.backward(ws_b, gb, grad);
  return softplus_neg(d);
}

double class_loss_and_grad(const Network& net, std::span<const double> x, std::size_t label,
                           std::span<double> grad, Workspace& ws) {
  const auto logits = net.forward(x, ws);
  std::vector<double> dlogits(logits.size());
  const double loss = softmax_cross_entropy(logits, label, dlogits);
  net.backward(ws, dlogits, grad);
  return loss;
}

}  // namespace imgrank::nn
