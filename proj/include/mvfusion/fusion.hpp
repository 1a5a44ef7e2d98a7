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

// The six fusion strategies plus the merge-function and gate-type variants
// of feature-level fusion.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mvfusion/datamodel.hpp"
#include "mvfusion/errors.hpp"
#include "mvfusion/graph.hpp"
#include "mvfusion/layers.hpp"
#include "mvfusion/rng.hpp"

namespace mvfusion {

enum class Method { kInput, kFeatureS, kFeatureG, kDecision, kMultiLoss, kEnsemble };
enum class Merge { kAverage, kMaximum, kProduct, kConcatenate };
enum class Gate { kGatedC, kGatedA, kGatedFA };

inline constexpr Method kAllMethods[] = {Method::kInput,    Method::kFeatureS,
                                         Method::kFeatureG, Method::kDecision,
                                         Method::kMultiLoss, Method::kEnsemble};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::kInput: return "input";
    case Method::kFeatureS: return "feature-s";
    case Method::kFeatureG: return "feature-g";
    case Method::kDecision: return "decision";
    case Method::kMultiLoss: return "multiloss";
    case Method::kEnsemble: return "ensemble";
  }
  return "?";
}

inline std::string_view to_string(Merge m) {
  switch (m) {
    case Merge::kAverage: return "average";
    case Merge::kMaximum: return "maximum";
    case Merge::kProduct: return "product";
    case Merge::kConcatenate: return "concatenate";
  }
  return "?";
}

inline std::string_view to_string(Gate g) {
  switch (g) {
    case Gate::kGatedC: return "gated-c";
    case Gate::kGatedA: return "gated-a";
    case Gate::kGatedFA: return "gatedf-a";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : kAllMethods)
    if (to_string(m) == s) return m;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

inline Merge parse_merge(std::string_view s) {
  for (Merge m : {Merge::kAverage, Merge::kMaximum, Merge::kProduct, Merge::kConcatenate})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown merge '" + std::string(s) + "'");
}

inline Gate parse_gate(std::string_view s) {
  for (Gate g : {Gate::kGatedC, Gate::kGatedA, Gate::kGatedFA})
    if (to_string(g) == s) return g;
  throw ConfigError("unknown gate '" + std::string(s) + "'");
}

struct FusionModelConfig {
  Method method = Method::kFeatureS;
  std::optional<Merge> merge;  // feature-s only
  std::optional<Gate> gate;    // feature-g only
  double aux_weight = 0.3;     // multiloss auxiliary loss weight
  EncoderConfig encoder;
  HeadConfig head;
  RegularizationConfig regularization;
  std::vector<ViewSpec> views;
  std::size_t timesteps = 12;
  std::uint64_t seed = 0;

  void validate() const {
    if (merge && method != Method::kFeatureS)
      throw ConfigError("merge applies only to feature-s");
    if (gate && method != Method::kFeatureG)
      throw ConfigError("gate applies only to feature-g");
    if (method == Method::kFeatureS && !merge)
      throw ConfigError("feature-s needs a merge function");
    if (method == Method::kFeatureG && !gate)
      throw ConfigError("feature-g needs a gate type");
    if (!(aux_weight >= 0.0)) throw ConfigError("aux weight must be >= 0");
    if (views.empty()) throw ConfigError("no views configured");
    if (timesteps < 1) throw ConfigError("timesteps must be >= 1");
    const bool needs_two = method == Method::kFeatureS || method == Method::kFeatureG ||
                           method == Method::kMultiLoss;
    if (needs_two && views.size() < 2)
      throw ConfigError(std::string(to_string(method)) + " needs at least two views");
    regularization.validate();
  }

  // Merge used by the shared fused path (multiloss builds on average).
  Merge fused_merge() const { return merge.value_or(Merge::kAverage); }

  std::size_t total_channels() const {
    std::size_t c = 0;
    for (const auto& v : views) c += v.channels;
    return c;
  }
};

// Per-view batch inputs: temporal views [B,T,C], static views [B,C].
template <class T>
struct Batch {
  std::vector<Tensor<T>> views;
  std::vector<T> labels;
  std::size_t size() const { return labels.size(); }
};

// Gathers `rows` of the named views from a dataset.
template <class T>
Batch<T> make_batch(const MultiViewDataset& d, std::span<const ViewSpec> views,
                    std::span<const std::size_t> rows) {
  Batch<T> b;
  const std::size_t n = rows.size();
  for (const ViewSpec& spec : views) {
    const ViewData& vd = d.view(d.view_index(spec.name));
    if (vd.spec.channels != spec.channels || vd.spec.is_static != spec.is_static)
      throw ConfigError("view '" + spec.name + "' does not match the model configuration");
    if (!vd.spec.is_static && vd.spec.timesteps != d.timesteps())
      throw ConfigError("view '" + spec.name + "' has inconsistent timesteps");
    const std::size_t per = vd.spec.sample_size();
    const Shape shape = vd.spec.is_static ? Shape{n, vd.spec.channels}
                                          : Shape{n, d.timesteps(), vd.spec.channels};
    Tensor<T> t(shape);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < per; ++k)
        t[i * per + k] = static_cast<T>(vd.values[rows[i] * per + k]);
    b.views.push_back(std::move(t));
  }
  b.labels.reserve(n);
  for (std::size_t r : rows) b.labels.push_back(static_cast<T>(d.labels()[r]));
  return b;
}

// [B, D] x V -> [B, V, D]
template <class T>
Value stack_views(Graph<T>& g, std::span<const Value> reps) {
  std::vector<Value> rows;
  rows.reserve(reps.size());
  for (Value r : reps) {
    const Shape& s = g.shape(r);
    if (s.rank() != 2) throw ShapeError("representation must be [B,D], got " + s.str());
    rows.push_back(g.reshape(r, Shape{s[0], 1, s[1]}));
  }
  return g.concat(rows, 1);
}

template <class T>
void check_representations(Graph<T>& g, std::span<const Value> reps) {
  if (reps.size() < 2) throw ConfigError("fusion needs at least two representations");
  const Shape& s0 = g.shape(reps[0]);
  for (Value r : reps)
    if (!(g.shape(r) == s0))
      throw ShapeError("representation shapes differ: " + g.shape(r).str() + " vs " + s0.str());
}

// Elementwise mean / max / product across views, or concatenation along the
// feature axis in view order.
template <class T>
Value merge_simple(Graph<T>& g, std::span<const Value> reps, Merge merge) {
  check_representations(g, reps);
  if (merge == Merge::kConcatenate) return g.concat(reps, 1);
  const Value stacked = stack_views(g, reps);
  switch (merge) {
    case Merge::kAverage: return g.reduce_mean(stacked, 1);
    case Merge::kMaximum: return g.reduce_max(stacked, 1);
    case Merge::kProduct: return g.reduce_prod(stacked, 1);
    case Merge::kConcatenate: break;
  }
  throw ContractError("unreachable merge");
}

// sum_v w_v * h_v, with weights [B,V] (one per view) or [B,V,D] (per feature).
template <class T>
Value fuse_weighted(Graph<T>& g, std::span<const Value> reps, Value weights) {
  check_representations(g, reps);
  const std::size_t views = reps.size();
  const std::size_t batch = g.shape(reps[0])[0];
  const std::size_t dim = g.shape(reps[0])[1];
  const Shape& ws = g.shape(weights);
  Value w3 = weights;
  if (ws.rank() == 2) {
    if (ws[0] != batch || ws[1] != views)
      throw ShapeError("view weights must be [B,V], got " + ws.str());
    // Broadcast each view weight across its D features with a 0/1 matrix.
    Tensor<T> expand(Shape{views, views * dim});
    for (std::size_t v = 0; v < views; ++v)
      for (std::size_t d = 0; d < dim; ++d) expand.at(v, v * dim + d) = T(1);
    w3 = g.reshape(g.matmul(weights, g.constant(std::move(expand))),
                   Shape{batch, views, dim});
  } else if (!(ws == Shape{batch, views, dim})) {
    throw ShapeError("feature weights must be [B,V,D], got " + ws.str());
  }
  const Value weighted = g.mul(stack_views(g, reps), w3);
  return g.scale(g.reduce_mean(weighted, 1), static_cast<T>(views));
}

// Per-sample attention weights over views. The context is the concatenation
// (gated-c) or the mean (gated-a, gatedf-a) of the view representations; a
// linear projection gives V logits (or V*D for the feature-specific gate)
// that are normalized with a softmax over the view axis.
template <class T>
class GateModule {
 public:
  GateModule() = default;
  GateModule(ParameterStore<T>& store, const std::string& prefix, Gate type,
             std::size_t views, std::size_t dim, Rng& rng)
      : type_(type), views_(views), dim_(dim) {
    const std::size_t in = type == Gate::kGatedC ? views * dim : dim;
    const std::size_t out = type == Gate::kGatedFA ? views * dim : views;
    w_ = store.add_parameter(prefix + ".w", glorot_uniform<T>(in, out, rng));
    b_ = store.add_parameter(prefix + ".b", Tensor<T>(Shape{out}));
  }

  Gate type() const { return type_; }
  std::size_t weight_index() const { return w_; }
  std::size_t bias_index() const { return b_; }

  Value weights(const ForwardContext<T>& f, std::span<const Value> reps) const {
    Graph<T>& g = f.graph;
    check_representations(g, reps);
    if (reps.size() != views_ || g.shape(reps[0])[1] != dim_)
      throw ShapeError("gate configured for " + std::to_string(views_) + " views of size " +
                       std::to_string(dim_));
    const std::size_t batch = g.shape(reps[0])[0];
    const Value context = type_ == Gate::kGatedC ? g.concat(reps, 1)
                                                 : g.reduce_mean(stack_views(g, reps), 1);
    const Value logits = g.add(g.matmul(context, f.param(w_)), f.param(b_));
    if (type_ == Gate::kGatedFA)
      return g.softmax(g.reshape(logits, Shape{batch, views_, dim_}), 1);
    return g.softmax(logits, 1);
  }

  Value fuse(const ForwardContext<T>& f, std::span<const Value> reps) const {
    return fuse_weighted(f.graph, reps, weights(f, reps));
  }

 private:
  Gate type_ = Gate::kGatedFA;
  std::size_t views_ = 0, dim_ = 0;
  std::size_t w_ = 0, b_ = 0;
};

template <class T>
struct ModelOutput {
  Value probability;         // [B]
  std::vector<Value> aux;    // per-view auxiliary probabilities (multiloss)
};

// One trainable fusion architecture. Parameters are created in a fixed order
// from Rng(config.seed), so equal configs yield bitwise-equal models.
template <class T>
class FusionModel {
 public:
  FusionModel() = default;
  explicit FusionModel(FusionModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.method == Method::kEnsemble)
      throw ContractError("ensemble is not a single trainable model; use train_ensemble");
    Rng rng(cfg_.seed);
    const auto& reg = cfg_.regularization;
    const std::size_t hid = cfg_.encoder.hidden_units;
    switch (cfg_.method) {
      case Method::kInput:
        encoders_.emplace_back(store_, "input.encoder", cfg_.total_channels(), cfg_.encoder,
                               reg, rng);
        heads_.emplace_back(store_, "head", hid, cfg_.head, reg, rng);
        break;
      case Method::kDecision:
        for (const auto& v : cfg_.views) {
          encoders_.emplace_back(store_, "view." + v.name + ".encoder", v.channels,
                                 cfg_.encoder, reg, rng);
          heads_.emplace_back(store_, "view." + v.name + ".head", hid, cfg_.head, reg, rng);
        }
        break;
      case Method::kFeatureS:
      case Method::kFeatureG:
      case Method::kMultiLoss: {
        for (const auto& v : cfg_.views)
          encoders_.emplace_back(store_, "view." + v.name + ".encoder", v.channels,
                                 cfg_.encoder, reg, rng);
        if (cfg_.method == Method::kFeatureG)
          gate_ = GateModule<T>(store_, "gate", *cfg_.gate, cfg_.views.size(), hid, rng);
        const bool concat =
            cfg_.method == Method::kFeatureS && cfg_.fused_merge() == Merge::kConcatenate;
        heads_.emplace_back(store_, "head", concat ? hid * cfg_.views.size() : hid,
                            cfg_.head, reg, rng);
        if (cfg_.method == Method::kMultiLoss)
          for (const auto& v : cfg_.views)
            heads_.emplace_back(store_, "aux." + v.name + ".head", hid, cfg_.head, reg, rng);
        break;
      }
      case Method::kEnsemble:
        break;
    }
  }

  const FusionModelConfig& config() const { return cfg_; }
  ParameterStore<T>& store() { return store_; }
  const ParameterStore<T>& store() const { return store_; }
  const GateModule<T>& gate() const { return gate_; }

  // View-representations [B,H], one per configured view (feature-level and
  // multiloss methods) or per branch (decision).
  std::vector<Value> representations(const ForwardContext<T>& f,
                                      std::span<const Value> inputs) const {
    check_inputs(f.graph, inputs);
    if (cfg_.method == Method::kInput) return {encode_input(f, inputs)};
    std::vector<Value> reps;
    for (std::size_t v = 0; v < cfg_.views.size(); ++v)
      reps.push_back(encoders_[v].encode(f, inputs[v], cfg_.views[v].is_static, cfg_.timesteps));
    return reps;
  }

  ModelOutput<T> forward(const ForwardContext<T>& f, std::span<const Value> inputs) const {
    Graph<T>& g = f.graph;
    ModelOutput<T> out;
    const std::vector<Value> reps = representations(f, inputs);
    switch (cfg_.method) {
      case Method::kInput:
        out.probability = g.sigmoid(heads_[0].forward(f, reps[0]));
        break;
      case Method::kFeatureS:
        out.probability = g.sigmoid(heads_[0].forward(f, merge_simple(g, std::span<const Value>(reps), cfg_.fused_merge())));
        break;
      case Method::kFeatureG:
        out.probability = g.sigmoid(heads_[0].forward(f, gate_.fuse(f, reps)));
        break;
      case Method::kMultiLoss:
        out.probability = g.sigmoid(heads_[0].forward(f, merge_simple(g, std::span<const Value>(reps), Merge::kAverage)));
        for (std::size_t v = 0; v < reps.size(); ++v)
          out.aux.push_back(g.sigmoid(heads_[1 + v].forward(f, reps[v])));
        break;
      case Method::kDecision: {
        const std::size_t batch = g.shape(reps[0])[0];
        std::vector<Value> probs;
        for (std::size_t v = 0; v < reps.size(); ++v)
          probs.push_back(g.reshape(g.sigmoid(heads_[v].forward(f, reps[v])), Shape{batch, 1}));
        out.probability = g.reduce_mean(g.concat(probs, 1), 1);
        break;
      }
      case Method::kEnsemble:
        throw ContractError("ensemble has no trainable forward");
    }
    return out;
  }

  // Eval-mode probabilities for a batch, computed in chunks.
  std::vector<T> predict(const Batch<T>& batch, std::size_t chunk = 512) const {
    std::vector<T> out;
    out.reserve(batch.size());
    for (std::size_t begin = 0; begin < batch.size(); begin += chunk) {
      const std::size_t end = std::min(batch.size(), begin + chunk);
      Graph<T> g;
      const auto params = store_.bind(g);
      ForwardContext<T> f{g, params, Mode::kEval, nullptr, &store_, nullptr};
      std::vector<Value> inputs;
      for (const auto& t : batch.views) inputs.push_back(g.constant(rows_of(t, begin, end)));
      const auto res = forward(f, inputs);
      const auto& p = g.value(res.probability);
      out.insert(out.end(), p.values().begin(), p.values().end());
    }
    return out;
  }

  std::vector<T> predict(const MultiViewDataset& d, std::span<const std::size_t> rows) const {
    return predict(make_batch<T>(d, cfg_.views, rows));
  }

 private:
  FusionModelConfig cfg_;
  ParameterStore<T> store_;
  std::vector<ViewEncoder<T>> encoders_;
  std::vector<DenseHead<T>> heads_;
  GateModule<T> gate_;

  static Tensor<T> rows_of(const Tensor<T>& t, std::size_t begin, std::size_t end) {
    const Shape& s = t.shape();
    const std::size_t per = t.size() / s[0];
    std::vector<T> data(t.data() + begin * per, t.data() + end * per);
    return Tensor<T>(s.with(0, end - begin), std::move(data));
  }

  void check_inputs(Graph<T>& g, std::span<const Value> inputs) const {
    if (inputs.size() != cfg_.views.size())
      throw ConfigError("expected " + std::to_string(cfg_.views.size()) + " views, got " +
                        std::to_string(inputs.size()));
    for (std::size_t v = 0; v < inputs.size(); ++v) {
      const Shape& s = g.shape(inputs[v]);
      const ViewSpec& spec = cfg_.views[v];
      const bool ok = spec.is_static
                          ? s.rank() == 2 && s[1] == spec.channels
                          : s.rank() == 3 && s[1] == cfg_.timesteps && s[2] == spec.channels;
      if (!ok)
        throw ConfigError("view '" + spec.name + "' input has shape " + s.str());
    }
  }

  // Input-level fusion: channelwise concatenation per timestep, static views
  // tiled first.
  Value encode_input(const ForwardContext<T>& f, std::span<const Value> inputs) const {
    Graph<T>& g = f.graph;
    std::vector<Value> seqs;
    for (std::size_t v = 0; v < inputs.size(); ++v)
      seqs.push_back(cfg_.views[v].is_static ? tile_static(g, inputs[v], cfg_.timesteps)
                                             : inputs[v]);
    const Value joined = seqs.size() == 1 ? seqs[0] : g.concat(seqs, 2);
    return encoders_[0].encode(f, joined, false, cfg_.timesteps);
  }
};

// Config for the single-view model trained on `view` (one encoder + head).
inline FusionModelConfig single_view_config(const FusionModelConfig& base, const ViewSpec& view,
                                            std::uint64_t seed) {
  FusionModelConfig c = base;
  c.method = Method::kInput;
  c.merge.reset();
  c.gate.reset();
  c.views = {view};
  c.seed = seed;
  return c;
}

// Arithmetic mean of per-model probability vectors, summed in model order.
template <class T>
std::vector<T> average_probabilities(std::span<const std::vector<T>> per_model) {
  if (per_model.empty()) throw ConfigError("no member predictions to average");
  std::vector<T> out(per_model[0].size(), T(0));
  for (const auto& p : per_model) {
    if (p.size() != out.size()) throw ShapeError("member predictions differ in length");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
  }
  for (T& v : out) v /= static_cast<T>(per_model.size());
  return out;
}

// Two-step ensemble: one independently trained single-view model per view,
// probabilities averaged at test time.
template <class T>
std::vector<T> ensemble_predict(std::span<const FusionModel<T>> members,
                                std::span<const ViewSpec> views, const MultiViewDataset& d,
                                std::span<const std::size_t> rows) {
  std::vector<std::vector<T>> probs;
  for (const ViewSpec& v : views) {
    const FusionModel<T>* found = nullptr;
    for (const auto& m : members)
      if (m.config().views.size() == 1 && m.config().views[0].name == v.name) found = &m;
    if (!found) throw ConfigError("ensemble has no model for view '" + v.name + "'");
    probs.push_back(found->predict(d, rows));
  }
  return average_probabilities<T>(probs);
}

}  // namespace mvfusion
