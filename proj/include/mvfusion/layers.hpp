/*
 * Copyright 2026 The mvfusion Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Neural building blocks: stacked GRU view encoders, the dense predictive
// head, dropout, batch normalization and Glorot initialization. Every block
// is expressed with Graph primitives, so gradients come for free.

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvfusion/errors.hpp"
#include "mvfusion/graph.hpp"
#include "mvfusion/rng.hpp"
#include "mvfusion/tensor.hpp"

namespace mvfusion {

enum class Mode { kTrain, kEval };

struct RegularizationConfig {
  double dropout_rate = 0.2;
  bool batchnorm = true;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.1;

  void validate() const {
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
      throw ConfigError("dropout rate must lie in [0,1)");
    if (!(bn_epsilon > 0.0)) throw ConfigError("batch-norm epsilon must be positive");
    if (!(bn_momentum > 0.0 && bn_momentum < 1.0))
      throw ConfigError("batch-norm momentum must lie in (0,1)");
  }
};

struct EncoderConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_units = 64;
};

struct HeadConfig {
  std::size_t hidden_units = 64;
};

// Named trainable parameters plus non-trainable buffers (batch-norm running
// statistics). Insertion order is stable and defines checkpoint layout.
template <class T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
  };

  std::size_t add_parameter(std::string name, Tensor<T> init) {
    params_.push_back({std::move(name), std::move(init)});
    return params_.size() - 1;
  }
  std::size_t add_buffer(std::string name, Tensor<T> init) {
    buffers_.push_back({std::move(name), std::move(init)});
    return buffers_.size() - 1;
  }

  std::vector<Entry>& parameters() { return params_; }
  const std::vector<Entry>& parameters() const { return params_; }
  std::vector<Entry>& buffers() { return buffers_; }
  const std::vector<Entry>& buffers() const { return buffers_; }

  Tensor<T>& parameter(std::size_t i) { return params_.at(i).value; }
  const Tensor<T>& parameter(std::size_t i) const { return params_.at(i).value; }
  Tensor<T>& buffer(std::size_t i) { return buffers_.at(i).value; }
  const Tensor<T>& buffer(std::size_t i) const { return buffers_.at(i).value; }

  std::size_t num_scalars() const {
    std::size_t n = 0;
    for (const auto& e : params_) n += e.value.size();
    return n;
  }

  // Registers every parameter as a gradient-tracking leaf of `g`.
  std::vector<Value> bind(Graph<T>& g) const {
    std::vector<Value> out;
    out.reserve(params_.size());
    for (const auto& e : params_) out.push_back(g.parameter(e.value));
    return out;
  }

  std::vector<Tensor<T>> parameter_values() const {
    std::vector<Tensor<T>> out;
    for (const auto& e : params_) out.push_back(e.value);
    return out;
  }

  bool operator==(const ParameterStore& o) const {
    auto same = [](const std::vector<Entry>& a, const std::vector<Entry>& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].name != b[i].name || !(a[i].value == b[i].value)) return false;
      return true;
    };
    return same(params_, o.params_) && same(buffers_, o.buffers_);
  }

 private:
  std::vector<Entry> params_;
  std::vector<Entry> buffers_;
};

// State threaded through one forward pass.
template <class T>
struct ForwardContext {
  Graph<T>& graph;
  std::span<const Value> params;  // ParameterStore::bind() of the model store
  Mode mode = Mode::kEval;
  Rng* rng = nullptr;                 // dropout masks; required in train mode
  const ParameterStore<T>* store = nullptr;  // batch-norm running statistics
  ParameterStore<T>* stats_out = nullptr;     // train mode: receives updated stats

  Value param(std::size_t i) const { return params[i]; }
};

// Glorot/Xavier uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
// Draws in double so float and double models share initial values.
template <class T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / double(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor<T> w(Shape{fan_in, fan_out});
  for (T& v : w.values()) v = static_cast<T>(dist(rng));
  return w;
}

// Inverted dropout: identity in eval mode or at rate 0; otherwise zeroes each
// entry with probability `rate` and scales survivors by 1 / (1 - rate).
template <class T>
Value dropout(Graph<T>& g, Value x, double rate, Mode mode, Rng* rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0,1)");
  if (mode == Mode::kEval || rate == 0.0) return x;
  if (!rng) throw ContractError("dropout in train mode needs an rng");
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> mask(g.shape(x));
  for (T& m : mask.values()) m = keep(*rng) ? scale : T(0);
  return g.mul(x, g.constant(std::move(mask)));
}

// Batch normalization over the batch axis of [B, D] inputs.
template <class T>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParameterStore<T>& store, const std::string& prefix, std::size_t features,
            const RegularizationConfig& reg)
      : features_(features),
        eps_(static_cast<T>(reg.bn_epsilon)),
        momentum_(static_cast<T>(reg.bn_momentum)) {
    gamma_ = store.add_parameter(prefix + ".gamma", Tensor<T>(Shape{features}, T(1)));
    beta_ = store.add_parameter(prefix + ".beta", Tensor<T>(Shape{features}, T(0)));
    mean_ = store.add_buffer(prefix + ".running_mean", Tensor<T>(Shape{features}, T(0)));
    var_ = store.add_buffer(prefix + ".running_var", Tensor<T>(Shape{features}, T(1)));
  }

  std::size_t features() const { return features_; }

  Value forward(const ForwardContext<T>& f, Value x) const {
    Graph<T>& g = f.graph;
    const Shape& s = g.shape(x);
    if (s.rank() != 2 || s[1] != features_)
      throw ShapeError("batchnorm expects [B," + std::to_string(features_) + "], got " +
                       s.str());
    Value normalized;
    if (f.mode == Mode::kTrain) {
      if (s[0] < 2) throw BatchError("batch norm in train mode needs batch size >= 2");
      const Value mean = g.reduce_mean(x, 0);
      const Value centered = g.sub(x, mean);
      const Value var = g.reduce_mean(g.mul(centered, centered), 0);
      normalized = g.mul(centered, g.rsqrt(var, eps_));
      if (f.stats_out) {
        Tensor<T>& rm = f.stats_out->buffer(mean_);
        Tensor<T>& rv = f.stats_out->buffer(var_);
        const Tensor<T>& bm = g.value(mean);
        const Tensor<T>& bv = g.value(var);
        for (std::size_t j = 0; j < features_; ++j) {
          rm[j] = (T(1) - momentum_) * rm[j] + momentum_ * bm[j];
          rv[j] = (T(1) - momentum_) * rv[j] + momentum_ * bv[j];
        }
      }
    } else {
      if (!f.store) throw ContractError("batch norm in eval mode needs running statistics");
      const Tensor<T>& rm = f.store->buffer(mean_);
      const Tensor<T>& rv = f.store->buffer(var_);
      Tensor<T> neg_mean(Shape{features_});
      Tensor<T> inv_std(Shape{features_});
      for (std::size_t j = 0; j < features_; ++j) {
        neg_mean[j] = -rm[j];
        inv_std[j] = T(1) / std::sqrt(rv[j] + eps_);
      }
      normalized = g.mul(g.add(x, g.constant(std::move(neg_mean))),
                         g.constant(std::move(inv_std)));
    }
    return g.add(g.mul(normalized, f.param(gamma_)), f.param(beta_));
  }

 private:
  std::size_t features_ = 0;
  T eps_{};
  T momentum_{};
  std::size_t gamma_ = 0, beta_ = 0, mean_ = 0, var_ = 0;
};

// Repeats a static [B, C] view across `timesteps` to [B, T, C].
template <class T>
Value tile_static(Graph<T>& g, Value x, std::size_t timesteps) {
  const Shape& s = g.shape(x);
  if (s.rank() != 2) throw ShapeError("static view must be [B,C], got " + s.str());
  const Value row = g.reshape(x, Shape{s[0], 1, s[1]});
  std::vector<Value> copies(timesteps, row);
  return g.concat(copies, 1);
}

// Stacked GRU; gate layout within the 3H blocks is (update, reset, candidate):
//   z = sigmoid(x Wz + bz + h Uz + cz)
//   r = sigmoid(x Wr + br + h Ur + cr)
//   n = tanh(x Wn + bn + r * (h Un + cn))
//   h' = (1 - z) * n + z * h
template <class T>
class GruEncoder {
 public:
  GruEncoder() = default;
  GruEncoder(ParameterStore<T>& store, const std::string& prefix,
             std::size_t input_channels, const EncoderConfig& cfg, Rng& rng)
      : input_channels_(input_channels), hidden_(cfg.hidden_units) {
    if (cfg.num_layers < 1 || cfg.hidden_units < 1 || input_channels < 1)
      throw ConfigError("GRU needs >= 1 layer, unit and input channel");
    for (std::size_t l = 0; l < cfg.num_layers; ++l) {
      const std::size_t in = l == 0 ? input_channels : hidden_;
      const std::string p = prefix + ".gru" + std::to_string(l);
      Layer layer;
      layer.input = in;
      layer.w = store.add_parameter(p + ".w_input", glorot_uniform<T>(in, 3 * hidden_, rng));
      layer.u = store.add_parameter(p + ".w_hidden",
                                    glorot_uniform<T>(hidden_, 3 * hidden_, rng));
      layer.bw = store.add_parameter(p + ".b_input", Tensor<T>(Shape{3 * hidden_}));
      layer.bu = store.add_parameter(p + ".b_hidden", Tensor<T>(Shape{3 * hidden_}));
      layers_.push_back(layer);
    }
  }

  std::size_t input_channels() const { return input_channels_; }
  std::size_t hidden_units() const { return hidden_; }
  std::size_t num_layers() const { return layers_.size(); }

  // [B, T, C] -> final top-layer hidden state [B, H]. Dropout is applied to
  // the sequence passed between stacked layers.
  Value forward(const ForwardContext<T>& f, Value sequence, double dropout_rate) const {
    Graph<T>& g = f.graph;
    const Shape s = g.shape(sequence);
    if (s.rank() != 3) throw ShapeError("GRU input must be [B,T,C], got " + s.str());
    if (s[2] != input_channels_)
      throw ShapeError("GRU expects " + std::to_string(input_channels_) +
                       " channels, got " + std::to_string(s[2]));
    if (s[1] < 1) throw ShapeError("GRU needs at least one timestep");
    const std::size_t batch = s[0], steps = s[1], h3 = 3 * hidden_;

    Value seq = sequence;
    Value h;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      if (l > 0) seq = dropout(g, seq, dropout_rate, f.mode, f.rng);
      // Input projections for all timesteps in one product.
      Value gx = g.matmul(g.reshape(seq, Shape{batch * steps, layer.input}), f.param(layer.w));
      gx = g.reshape(g.add(gx, f.param(layer.bw)), Shape{batch, steps, h3});
      h = g.constant(Tensor<T>(Shape{batch, hidden_}));
      std::vector<Value> outputs;
      const bool keep_sequence = l + 1 < layers_.size();
      for (std::size_t t = 0; t < steps; ++t) {
        const Value xt = g.reshape(g.slice(gx, 1, t, t + 1), Shape{batch, h3});
        const Value ht = g.add(g.matmul(h, f.param(layer.u)), f.param(layer.bu));
        const Value z = g.sigmoid(g.add(g.slice(xt, 1, 0, hidden_), g.slice(ht, 1, 0, hidden_)));
        const Value r = g.sigmoid(
            g.add(g.slice(xt, 1, hidden_, 2 * hidden_), g.slice(ht, 1, hidden_, 2 * hidden_)));
        const Value n = g.tanh(g.add(g.slice(xt, 1, 2 * hidden_, h3),
                                     g.mul(r, g.slice(ht, 1, 2 * hidden_, h3))));
        h = g.add(n, g.mul(z, g.sub(h, n)));
        if (keep_sequence) outputs.push_back(g.reshape(h, Shape{batch, 1, hidden_}));
      }
      if (keep_sequence) seq = g.concat(outputs, 1);
    }
    return h;
  }

 private:
  struct Layer {
    std::size_t input = 0;
    std::size_t w = 0, u = 0, bw = 0, bu = 0;
  };
  std::size_t input_channels_ = 0;
  std::size_t hidden_ = 0;
  std::vector<Layer> layers_;
};

// GRU encoder followed by optional batch norm on the view-representation.
template <class T>
class ViewEncoder {
 public:
  ViewEncoder() = default;
  ViewEncoder(ParameterStore<T>& store, const std::string& prefix,
              std::size_t input_channels, const EncoderConfig& cfg,
              const RegularizationConfig& reg, Rng& rng)
      : gru_(store, prefix, input_channels, cfg, rng), dropout_rate_(reg.dropout_rate) {
    if (reg.batchnorm) {
      bn_ = BatchNorm<T>(store, prefix + ".bn", cfg.hidden_units, reg);
      use_bn_ = true;
    }
  }

  const GruEncoder<T>& gru() const { return gru_; }
  std::size_t output_size() const { return gru_.hidden_units(); }

  // `view` is [B,T,C] for temporal views or [B,C] for static views, which
  // are tiled to `timesteps` first.
  Value encode(const ForwardContext<T>& f, Value view, bool is_static,
               std::size_t timesteps) const {
    Value seq = is_static ? tile_static(f.graph, view, timesteps) : view;
    Value rep = gru_.forward(f, seq, dropout_rate_);
    return use_bn_ ? bn_.forward(f, rep) : rep;
  }

 private:
  GruEncoder<T> gru_;
  BatchNorm<T> bn_;
  bool use_bn_ = false;
  double dropout_rate_ = 0.0;
};

// logit = W2 relu(BN(W1 x + b1)) + b2, dropout on the hidden activation.
template <class T>
class DenseHead {
 public:
  DenseHead() = default;
  DenseHead(ParameterStore<T>& store, const std::string& prefix, std::size_t input_size,
            const HeadConfig& cfg, const RegularizationConfig& reg, Rng& rng)
      : input_size_(input_size), dropout_rate_(reg.dropout_rate) {
    w1_ = store.add_parameter(prefix + ".w_hidden",
                              glorot_uniform<T>(input_size, cfg.hidden_units, rng));
    b1_ = store.add_parameter(prefix + ".b_hidden", Tensor<T>(Shape{cfg.hidden_units}));
    if (reg.batchnorm) {
      bn_ = BatchNorm<T>(store, prefix + ".bn", cfg.hidden_units, reg);
      use_bn_ = true;
    }
    w2_ = store.add_parameter(prefix + ".w_out", glorot_uniform<T>(cfg.hidden_units, 1, rng));
    b2_ = store.add_parameter(prefix + ".b_out", Tensor<T>(Shape{1}));
  }

  std::size_t input_size() const { return input_size_; }

  // [B, D] -> logits [B]
  Value forward(const ForwardContext<T>& f, Value x) const {
    Graph<T>& g = f.graph;
    const Shape& s = g.shape(x);
    if (s.rank() != 2 || s[1] != input_size_)
      throw ShapeError("head expects [B," + std::to_string(input_size_) + "], got " + s.str());
    Value hidden = g.add(g.matmul(x, f.param(w1_)), f.param(b1_));
    if (use_bn_) hidden = bn_.forward(f, hidden);
    hidden = dropout(g, g.relu(hidden), dropout_rate_, f.mode, f.rng);
    const Value logit = g.add(g.matmul(hidden, f.param(w2_)), f.param(b2_));
    return g.reshape(logit, Shape{s[0]});
  }

 private:
  std::size_t input_size_ = 0;
  double dropout_rate_ = 0.0;
  std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0;
  BatchNorm<T> bn_;
  bool use_bn_ = false;
};

}  // namespace mvfusion
