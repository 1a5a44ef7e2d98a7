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

// Loss, optimizer, early-stopped training loop and the repeated-run harness.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvfusion/datamodel.hpp"
#include "mvfusion/errors.hpp"
#include "mvfusion/fusion.hpp"
#include "mvfusion/graph.hpp"
#include "mvfusion/layers.hpp"
#include "mvfusion/metrics.hpp"
#include "mvfusion/rng.hpp"

namespace mvfusion {

inline constexpr double kProbabilityEpsilon = 1e-7;

using LogFn = std::function<void(std::string_view)>;

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t max_epochs = 1000;
  std::size_t patience = 5;
  double min_delta = 0.01;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t runs = 10;
  std::uint64_t base_seed = 0;
  double val_fraction = 0.1;
  double threshold = 0.5;

  void validate() const {
    if (batch_size < 2) throw ConfigError("batch size must be >= 2 (batch norm)");
    if (max_epochs < 1) throw ConfigError("max epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (!(min_delta >= 0.0)) throw ConfigError("min delta must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("adam betas must lie in [0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
    if (runs < 1) throw ConfigError("runs must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
      throw ConfigError("validation fraction must lie in (0,1)");
  }
};

// ---------------------------------------------------------------------------
// Losses

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
template <class T>
Value bce_loss(Graph<T>& g, Value probs, std::span<const T> labels) {
  return g.bce(probs, labels, static_cast<T>(kProbabilityEpsilon));
}

template <class T>
double bce_loss(std::span<const T> probs, std::span<const T> labels) {
  if (probs.size() != labels.size() || probs.empty())
    throw ShapeError("bce: probabilities and labels differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double q = std::clamp(static_cast<double>(probs[i]), kProbabilityEpsilon,
                                1.0 - kProbabilityEpsilon);
    const double y = static_cast<double>(labels[i]);
    total -= y * std::log(q) + (1.0 - y) * std::log(1.0 - q);
  }
  return total / double(probs.size());
}

// main + aux_weight * sum(aux), summed in view order.
template <class T>
T multiloss_total(T main, std::span<const T> aux, T aux_weight) {
  if (aux_weight < T(0)) throw ConfigError("aux weight must be >= 0");
  T sum = 0;
  for (T a : aux) sum += a;
  return main + aux_weight * sum;
}

template <class T>
Value multiloss_total(Graph<T>& g, Value main, std::span<const Value> aux, T aux_weight) {
  if (aux_weight < T(0)) throw ConfigError("aux weight must be >= 0");
  if (aux.empty()) return main;
  Value sum = aux[0];
  for (std::size_t v = 1; v < aux.size(); ++v) sum = g.add(sum, aux[v]);
  return g.add(main, g.scale(sum, aux_weight));
}

struct LossTerms {
  Value total;
  Value main;
  std::vector<Value> aux;
};

template <class T>
LossTerms training_loss(Graph<T>& g, const ModelOutput<T>& out, std::span<const T> labels,
                        double aux_weight) {
  LossTerms terms;
  terms.main = bce_loss(g, out.probability, labels);
  for (Value p : out.aux) terms.aux.push_back(bce_loss(g, p, labels));
  terms.total = terms.aux.empty()
                    ? terms.main
                    : multiloss_total(g, terms.main, std::span<const Value>(terms.aux),
                                      static_cast<T>(aux_weight));
  return terms;
}

// ---------------------------------------------------------------------------
// Adam

template <class T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::size_t step = 0;
};

// One bias-corrected Adam update of every parameter in `store`.
template <class T>
void adam_step(ParameterStore<T>& store, std::span<const Tensor<T>> grads, AdamState<T>& state,
               const TrainConfig& hp) {
  auto& params = store.parameters();
  if (grads.size() != params.size()) throw ShapeError("adam: gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.shape());
      state.v.emplace_back(p.value.shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state does not match parameters");
  for (const auto& g : grads)
    for (T x : g.values())
      if (!std::isfinite(static_cast<double>(x))) throw NumericError("non-finite gradient");
  ++state.step;
  const T b1 = static_cast<T>(hp.beta1), b2 = static_cast<T>(hp.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(hp.beta1, double(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(hp.beta2, double(state.step)));
  const T lr = static_cast<T>(hp.learning_rate), eps = static_cast<T>(hp.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* theta = params[i].value.data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const T* g = grads[i].data();
    if (grads[i].size() != params[i].value.size()) throw ShapeError("adam: gradient shape");
    for (std::size_t k = 0; k < grads[i].size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      const T m_hat = m[k] / c1;
      const T v_hat = v[k] / c2;
      theta[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Early stopping

// An epoch improves when its validation loss beats the best loss seen so far
// by more than min_delta; training stops after `patience` consecutive
// non-improving epochs. The best loss itself tracks the running minimum, so
// the restored snapshot always matches the lowest recorded loss.
class EarlyStopping {
 public:
  struct Decision {
    bool new_best = false;
    bool improved = false;
    bool stop = false;
  };

  EarlyStopping(std::size_t patience, double min_delta)
      : patience_(patience), min_delta_(min_delta) {}

  Decision update(double val_loss) {
    ++epoch_;
    Decision d;
    d.improved = val_loss < best_ - min_delta_;
    d.new_best = val_loss < best_;
    if (d.new_best) {
      best_ = val_loss;
      best_epoch_ = epoch_;
    }
    wait_ = d.improved ? 0 : wait_ + 1;
    d.stop = wait_ >= patience_;
    return d;
  }

  double best_loss() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }
  std::size_t epochs_seen() const { return epoch_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t epoch_ = 0;
  std::size_t wait_ = 0;
};

struct FitOutcome {
  std::size_t epochs_trained = 0;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool stopped_early = false;
  std::vector<double> val_history;
};

// Generic epoch loop. `train_epoch(epoch)` runs one pass over the training
// data, `validate()` returns the validation loss, `snapshot(epoch)` stores the
// current parameters and `restore()` reinstates the last snapshot.
template <class TrainEpoch, class Validate, class Snapshot, class Restore>
FitOutcome fit(const TrainConfig& tc, TrainEpoch&& train_epoch, Validate&& validate,
               Snapshot&& snapshot, Restore&& restore, const LogFn& log = {}) {
  EarlyStopping stopper(tc.patience, tc.min_delta);
  FitOutcome out;
  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    train_epoch(epoch);
    const double loss = validate();
    if (!std::isfinite(loss))
      throw NumericError("validation loss diverged at epoch " + std::to_string(epoch));
    out.val_history.push_back(loss);
    out.epochs_trained = epoch;
    const auto d = stopper.update(loss);
    if (d.new_best) snapshot(epoch);
    if (d.stop) {
      out.stopped_early = true;
      if (log)
        log("early stopping at epoch " + std::to_string(epoch) + " (best epoch " +
            std::to_string(stopper.best_epoch()) + ", val loss " +
            std::to_string(stopper.best_loss()) + ")");
      break;
    }
  }
  restore();
  out.best_epoch = stopper.best_epoch();
  out.best_val_loss = stopper.best_loss();
  return out;
}

// ---------------------------------------------------------------------------
// Runs

struct TrainRunResult {
  std::string section;  // "feature-s", "single:optical", ...
  Method method = Method::kInput;
  std::optional<Merge> merge;
  std::optional<Gate> gate;
  std::vector<std::string> views;
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  double val_loss = 0.0;
  RunMetrics metrics;
  double wall_time_s = 0.0;
  bool ok = true;
  std::string error;
  std::vector<double> val_history;
};

inline nlohmann::json to_json(const TrainRunResult& r) {
  nlohmann::json j;
  j["section"] = r.section;
  j["method"] = std::string(to_string(r.method));
  j["merge"] = r.merge ? nlohmann::json(std::string(to_string(*r.merge))) : nlohmann::json();
  j["gate"] = r.gate ? nlohmann::json(std::string(to_string(*r.gate))) : nlohmann::json();
  j["views"] = r.views;
  j["seed"] = r.seed;
  j["epochs"] = r.epochs;
  j["val_loss"] = r.val_loss;
  j["metrics"] = {{"aa", r.metrics.aa},
                  {"auc", r.metrics.auc},
                  {"f1", r.metrics.f1},
                  {"entropy", r.metrics.entropy}};
  j["wall_time_s"] = r.wall_time_s;
  j["status"] = r.ok ? "ok" : "failed";
  if (!r.ok) j["error"] = r.error;
  return j;
}

inline TrainRunResult result_from_json(const nlohmann::json& j) {
  try {
    TrainRunResult r;
    r.method = parse_method(j.at("method").get<std::string>());
    r.section = j.value("section", std::string(to_string(r.method)));
    if (j.contains("merge") && !j["merge"].is_null())
      r.merge = parse_merge(j["merge"].get<std::string>());
    if (j.contains("gate") && !j["gate"].is_null())
      r.gate = parse_gate(j["gate"].get<std::string>());
    if (j.contains("views")) r.views = j["views"].get<std::vector<std::string>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.epochs = j.at("epochs").get<std::size_t>();
    r.val_loss = j.at("val_loss").get<double>();
    const auto& m = j.at("metrics");
    r.metrics = {m.at("aa").get<double>(), m.at("auc").get<double>(), m.at("f1").get<double>(),
                 m.at("entropy").get<double>()};
    r.wall_time_s = j.value("wall_time_s", 0.0);
    r.ok = j.value("status", std::string("ok")) == "ok";
    r.error = j.value("error", std::string());
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed result record: ") + e.what());
  }
}

inline std::string to_jsonl(std::span<const TrainRunResult> results) {
  std::string out;
  for (const auto& r : results) out += to_json(r).dump() + "\n";
  return out;
}

inline std::vector<TrainRunResult> parse_jsonl(std::string_view text) {
  std::vector<TrainRunResult> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(result_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(std::string("results line is not valid JSON: ") + e.what());
    }
  }
  return out;
}

// Train/validation/test indices used for every run of an experiment. When
// the dataset carries no validation split, a fraction of the training split
// is held out once, seeded by the experiment's base seed.
inline Splits resolve_splits(const MultiViewDataset& d, const TrainConfig& tc) {
  Splits s = d.splits();
  if (s.train.empty()) throw ConfigError("empty train split");
  if (s.test.empty()) throw ConfigError("empty test split");
  if (s.val.empty()) {
    auto [train, val] = split_train_val(s.train, tc.val_fraction, tc.base_seed);
    s.train = std::move(train);
    s.val = std::move(val);
  }
  return s;
}

inline std::vector<std::uint8_t> labels_of(const MultiViewDataset& d,
                                           std::span<const std::size_t> rows) {
  std::vector<std::uint8_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(d.labels()[r]);
  return out;
}

// Loss of the training objective over `batch` in eval mode, averaged per
// sample across chunks.
template <class T>
double evaluate_loss(const FusionModel<T>& model, const Batch<T>& batch, std::size_t chunk = 512) {
  double total = 0.0;
  const auto& store = model.store();
  for (std::size_t begin = 0; begin < batch.size(); begin += chunk) {
    const std::size_t end = std::min(batch.size(), begin + chunk);
    Graph<T> g;
    const auto params = store.bind(g);
    ForwardContext<T> f{g, params, Mode::kEval, nullptr, &store, nullptr};
    std::vector<Value> inputs;
    for (const auto& t : batch.views) {
      const std::size_t per = t.size() / t.shape()[0];
      std::vector<T> data(t.data() + begin * per, t.data() + end * per);
      inputs.push_back(g.constant(Tensor<T>(t.shape().with(0, end - begin), std::move(data))));
    }
    const auto out = model.forward(f, inputs);
    const std::span<const T> labels(batch.labels.data() + begin, end - begin);
    const auto terms = training_loss(g, out, labels, model.config().aux_weight);
    total += static_cast<double>(g.value(terms.total).item()) * double(end - begin);
  }
  return total / double(batch.size());
}

template <class T>
struct TrainedModel {
  FusionModel<T> model;
  TrainRunResult result;
};

inline std::string section_name(const FusionModelConfig& cfg) {
  if (cfg.method == Method::kInput && cfg.views.size() == 1) return "single:" + cfg.views[0].name;
  return std::string(to_string(cfg.method));
}

inline TrainRunResult describe_run(const FusionModelConfig& cfg) {
  TrainRunResult r;
  r.section = section_name(cfg);
  r.method = cfg.method;
  r.merge = cfg.merge;
  r.gate = cfg.gate;
  for (const auto& v : cfg.views) r.views.push_back(v.name);
  r.seed = cfg.seed;
  return r;
}

// Trains one model with early stopping on fixed splits and evaluates the
// restored best-validation parameters on the test split.
template <class T = float>
TrainedModel<T> train_model(const FusionModelConfig& cfg, const TrainConfig& tc,
                            const MultiViewDataset& d, const Splits& splits,
                            const LogFn& log = {}) {
  tc.validate();
  if (splits.train.empty() || splits.val.empty() || splits.test.empty())
    throw ConfigError("train_model needs non-empty train, val and test splits");
  if (cfg.method == Method::kEnsemble)
    throw ContractError("ensemble is trained with train_ensemble");
  const auto start = std::chrono::steady_clock::now();
  TrainedModel<T> out{FusionModel<T>(cfg), describe_run(cfg)};
  FusionModel<T>& model = out.model;

  Rng shuffle_rng(derive_seed(cfg.seed, 1));
  Rng dropout_rng(derive_seed(cfg.seed, 2));
  AdamState<T> adam;
  std::vector<std::size_t> order = splits.train;
  const Batch<T> val_batch = make_batch<T>(d, cfg.views, splits.val);

  auto train_epoch = [&](std::size_t) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t begin = 0; begin < order.size(); begin += tc.batch_size) {
      const std::size_t end = std::min(order.size(), begin + tc.batch_size);
      if (end - begin < 2) break;  // batch norm needs two samples
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Batch<T> batch = make_batch<T>(d, cfg.views, rows);
      Graph<T> g;
      auto& store = model.store();
      const auto params = store.bind(g);
      ForwardContext<T> f{g, params, Mode::kTrain, &dropout_rng, &store, &store};
      std::vector<Value> inputs;
      for (const auto& t : batch.views) inputs.push_back(g.constant(t));
      const auto result = model.forward(f, inputs);
      const auto terms = training_loss(g, result, std::span<const T>(batch.labels),
                                       cfg.aux_weight);
      if (!std::isfinite(static_cast<double>(g.value(terms.total).item())))
        throw NumericError("training loss diverged");
      g.backward(terms.total);
      std::vector<Tensor<T>> grads;
      grads.reserve(params.size());
      for (Value p : params) grads.push_back(g.grad(p));
      adam_step(store, std::span<const Tensor<T>>(grads), adam, tc);
    }
  };
  ParameterStore<T> best = model.store();
  auto validate = [&] { return evaluate_loss(model, val_batch); };
  auto snapshot = [&](std::size_t) { best = model.store(); };
  auto restore = [&] { model.store() = best; };
  const FitOutcome fo = fit(tc, train_epoch, validate, snapshot, restore, log);

  const auto test_probs = model.predict(d, splits.test);
  const auto test_labels = labels_of(d, splits.test);
  out.result.epochs = fo.epochs_trained;
  out.result.val_loss = fo.best_val_loss;
  out.result.val_history = fo.val_history;
  out.result.metrics = evaluate_predictions<T>(test_probs, test_labels, tc.threshold);
  out.result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

template <class T>
struct EnsembleRun {
  std::vector<TrainedModel<T>> members;  // one single-view model per view
  TrainRunResult result;
};

// Seed of the single-view member for view `v` within a run.
inline std::uint64_t member_seed(std::uint64_t run_seed, std::size_t v) {
  return derive_seed(run_seed, 100 + v);
}

// Two-step ensemble: trains one single-view model per view, then averages
// their test probabilities.
template <class T = float>
EnsembleRun<T> train_ensemble(const FusionModelConfig& cfg, const TrainConfig& tc,
                              const MultiViewDataset& d, const Splits& splits,
                              const LogFn& log = {}) {
  const auto start = std::chrono::steady_clock::now();
  EnsembleRun<T> run;
  for (std::size_t v = 0; v < cfg.views.size(); ++v) {
    const auto member_cfg = single_view_config(cfg, cfg.views[v], member_seed(cfg.seed, v));
    run.members.push_back(train_model<T>(member_cfg, tc, d, splits, log));
  }
  run.result = ensemble_result(run.members, cfg, tc, d, splits);
  run.result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

// Evaluates already trained single-view members as an ensemble.
template <class T>
TrainRunResult ensemble_result(std::span<const TrainedModel<T>> members,
                               const FusionModelConfig& cfg, const TrainConfig& tc,
                               const MultiViewDataset& d, const Splits& splits) {
  std::vector<FusionModel<T>> models;
  for (const auto& m : members) models.push_back(m.model);
  TrainRunResult r;
  r.section = "ensemble";
  r.method = Method::kEnsemble;
  for (const auto& v : cfg.views) r.views.push_back(v.name);
  r.seed = cfg.seed;
  for (const auto& m : members) r.epochs = std::max(r.epochs, m.result.epochs);
  const auto val_probs = ensemble_predict<T>(models, cfg.views, d, splits.val);
  std::vector<T> val_labels;
  for (std::size_t i : splits.val) val_labels.push_back(static_cast<T>(d.labels()[i]));
  r.val_loss = bce_loss<T>(val_probs, val_labels);
  const auto probs = ensemble_predict<T>(models, cfg.views, d, splits.test);
  r.metrics = evaluate_predictions<T>(probs, labels_of(d, splits.test), tc.threshold);
  return r;
}

template <class T>
TrainRunResult ensemble_result(const std::vector<TrainedModel<T>>& members,
                               const FusionModelConfig& cfg, const TrainConfig& tc,
                               const MultiViewDataset& d, const Splits& splits) {
  return ensemble_result<T>(std::span<const TrainedModel<T>>(members), cfg, tc, d, splits);
}

// Optional hooks for run_experiment callers (checkpointing, progress).
struct ExperimentHooks {
  LogFn log;
  std::function<void(std::size_t run, const TrainedModel<float>&)> on_model;
  std::function<void(std::size_t run, const EnsembleRun<float>&)> on_ensemble;
};

// `runs` independent trainings with seeds base_seed + run; splits are fixed
// across runs. Failed runs are recorded; at least one must succeed.
inline std::vector<TrainRunResult> run_experiment(const FusionModelConfig& base,
                                                  const TrainConfig& tc,
                                                  const MultiViewDataset& d, std::size_t runs,
                                                  const ExperimentHooks& hooks = {}) {
  tc.validate();
  if (runs < 1) throw ConfigError("runs must be >= 1");
  const Splits splits = resolve_splits(d, tc);
  std::vector<TrainRunResult> results;
  for (std::size_t r = 0; r < runs; ++r) {
    FusionModelConfig cfg = base;
    cfg.seed = tc.base_seed + r;
    try {
      if (cfg.method == Method::kEnsemble) {
        auto run = train_ensemble<float>(cfg, tc, d, splits, hooks.log);
        if (hooks.on_ensemble) hooks.on_ensemble(r, run);
        results.push_back(run.result);
      } else {
        auto trained = train_model<float>(cfg, tc, d, splits, hooks.log);
        if (hooks.on_model) hooks.on_model(r, trained);
        results.push_back(trained.result);
      }
    } catch (const NumericError& e) {
      TrainRunResult failed = describe_run(cfg);
      failed.ok = false;
      failed.error = e.what();
      if (hooks.log) hooks.log("run " + std::to_string(r) + " failed: " + e.what());
      results.push_back(std::move(failed));
    }
  }
  const bool any_ok =
      std::any_of(results.begin(), results.end(), [](const auto& r) { return r.ok; });
  if (!any_ok) throw NumericError("every run of the experiment failed");
  return results;
}

// Aggregate over the successful runs of one section.
inline MetricsReport aggregate(std::span<const TrainRunResult> results) {
  std::vector<RunMetrics> ok;
  for (const auto& r : results)
    if (r.ok) ok.push_back(r.metrics);
  return aggregate(std::span<const RunMetrics>(ok));
}

}  // namespace mvfusion
