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

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "mvfusion/datamodel.hpp"
#include "mvfusion/fusion.hpp"
#include "mvfusion/training.hpp"
#include "grad_suites.hpp"
#include "test_util.hpp"

namespace mvfusion {
namespace {

using testing::check_model_grad;
using testing::random_tensor;
using testing::randomize;

// H=3, T=4, three views (two temporal, one static).
FusionModelConfig tiny_config(Method m) {
  FusionModelConfig c;
  c.method = m;
  if (m == Method::kFeatureS) c.merge = Merge::kAverage;
  if (m == Method::kFeatureG) c.gate = Gate::kGatedFA;
  c.encoder = {2, 3};
  c.head = {3};
  c.regularization.dropout_rate = 0.0;
  c.timesteps = 4;
  c.views = {{"a", 2, 4, false, ""}, {"b", 1, 4, false, ""}, {"c", 2, 0, true, ""}};
  c.seed = 5;
  return c;
}

std::vector<Tensor<double>> tiny_inputs(Rng& rng, const FusionModelConfig& c, std::size_t b) {
  std::vector<Tensor<double>> out;
  for (const auto& v : c.views)
    out.push_back(random_tensor(rng, v.is_static ? Shape{b, v.channels}
                                                 : Shape{b, c.timesteps, v.channels}));
  return out;
}

std::vector<Value> constants(Graph<double>& g, const std::vector<Tensor<double>>& ts) {
  std::vector<Value> out;
  for (const auto& t : ts) out.push_back(g.constant(t));
  return out;
}

std::vector<Value> random_reps(Graph<double>& g, Rng& rng, std::size_t v, std::size_t b,
                               std::size_t d) {
  std::vector<Value> reps;
  for (std::size_t i = 0; i < v; ++i) reps.push_back(g.constant(random_tensor(rng, Shape{b, d}, -3, 3)));
  return reps;
}

ForwardContext<double> eval_ctx(Graph<double>& g, const std::vector<Value>& params,
                                const ParameterStore<double>& store) {
  return {g, params, Mode::kEval, nullptr, &store, nullptr};
}

// ---- merges

TEST(Merge, Examples) {
  Graph<double> g;
  const Value a = g.constant(Tensor<double>(Shape{1, 2}, {1, 3}));
  const Value b = g.constant(Tensor<double>(Shape{1, 2}, {3, 1}));
  const std::vector<Value> ab{a, b};
  EXPECT_EQ(g.value(merge_simple(g, std::span<const Value>(ab), Merge::kAverage)).vec(),
            (std::vector<double>{2, 2}));
  EXPECT_EQ(g.value(merge_simple(g, std::span<const Value>(ab), Merge::kMaximum)).vec(),
            (std::vector<double>{3, 3}));
  const std::vector<Value> pq{g.constant(Tensor<double>(Shape{1, 2}, {2, 0.5})),
                              g.constant(Tensor<double>(Shape{1, 2}, {0.5, 2}))};
  EXPECT_EQ(g.value(merge_simple(g, std::span<const Value>(pq), Merge::kProduct)).vec(),
            (std::vector<double>{1, 1}));
  const std::vector<Value> xy{g.constant(Tensor<double>(Shape{1, 1}, {1})),
                              g.constant(Tensor<double>(Shape{1, 1}, {2}))};
  const auto& cat = g.value(merge_simple(g, std::span<const Value>(xy), Merge::kConcatenate));
  EXPECT_EQ(cat.shape(), (Shape{1, 2}));
  EXPECT_EQ(cat.vec(), (std::vector<double>{1, 2}));
}

TEST(Merge, IdenticalViewsAreIdempotent) {
  Rng rng(1);
  Graph<double> g;
  const Value h = g.constant(random_tensor(rng, Shape{3, 4}));
  const std::vector<Value> same{h, h, h};
  for (Merge m : {Merge::kAverage, Merge::kMaximum})
    for (std::size_t i = 0; i < 12; ++i)
      EXPECT_NEAR(g.value(merge_simple(g, std::span<const Value>(same), m))[i], g.value(h)[i],
                  1e-15);
}

TEST(Merge, PermutationInvariance) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    Graph<double> g;
    auto reps = random_reps(g, rng, 3, 2, 4);
    std::vector<Value> perm{reps[2], reps[0], reps[1]};
    for (Merge m : {Merge::kAverage, Merge::kMaximum, Merge::kProduct}) {
      const auto& x = g.value(merge_simple(g, std::span<const Value>(reps), m));
      const auto& y = g.value(merge_simple(g, std::span<const Value>(perm), m));
      for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(x[i], y[i], 1e-12);
    }
    // concatenation permutes feature blocks
    const auto& c = g.value(merge_simple(g, std::span<const Value>(reps), Merge::kConcatenate));
    const auto& cp = g.value(merge_simple(g, std::span<const Value>(perm), Merge::kConcatenate));
    const std::size_t src[3] = {2, 0, 1};
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t v = 0; v < 3; ++v)
        for (std::size_t k = 0; k < 4; ++k)
          EXPECT_EQ(cp.at(b, v * 4 + k), c.at(b, src[v] * 4 + k));
  }
}

TEST(Merge, ShapeMismatchIsRejected) {
  Graph<double> g;
  const std::vector<Value> bad{g.constant(Tensor<double>(Shape{2, 3})),
                               g.constant(Tensor<double>(Shape{2, 4}))};
  EXPECT_THROW(merge_simple(g, std::span<const Value>(bad), Merge::kAverage), ShapeError);
}

// ---- gates

TEST(Gate, WeightsFormASimplex) {
  Rng rng(3);
  for (Gate type : {Gate::kGatedC, Gate::kGatedA, Gate::kGatedFA}) {
    ParameterStore<double> store;
    const GateModule<double> gate(store, "gate", type, 3, 4, rng);
    for (int trial = 0; trial < 100; ++trial) {
      randomize(store, rng);
      Graph<double> g;
      const auto params = store.bind(g);
      const auto f = eval_ctx(g, params, store);
      const auto reps = random_reps(g, rng, 3, 5, 4);
      const Value w = gate.weights(f, reps);
      const Shape& s = g.shape(w);
      ASSERT_EQ(s[1], 3u);
      if (type == Gate::kGatedFA)
        ASSERT_EQ(s, (Shape{5, 3, 4}));
      else
        ASSERT_EQ(s, (Shape{5, 3}));
      const std::size_t inner = type == Gate::kGatedFA ? 4 : 1;
      const auto& wv = g.value(w);
      for (std::size_t b = 0; b < 5; ++b)
        for (std::size_t k = 0; k < inner; ++k) {
          double sum = 0;
          for (std::size_t v = 0; v < 3; ++v) {
            const double x = wv[(b * 3 + v) * inner + k];
            EXPECT_GE(x, 0.0);
            sum += x;
          }
          EXPECT_NEAR(sum, 1.0, 1e-6);
        }
    }
  }
}

TEST(Gate, ZeroProjectionGivesUniformWeights) {
  Rng rng(4);
  for (Gate type : {Gate::kGatedC, Gate::kGatedA, Gate::kGatedFA}) {
    ParameterStore<double> store;
    const GateModule<double> gate(store, "gate", type, 4, 3, rng);
    for (auto& e : store.parameters()) e.value.fill(0.0);
    Graph<double> g;
    const auto params = store.bind(g);
    const auto reps = random_reps(g, rng, 4, 2, 3);
    for (double w : g.value(gate.weights(eval_ctx(g, params, store), reps)).values())
      EXPECT_DOUBLE_EQ(w, 0.25);
    // uniform weights reduce to the average merge
    const auto& fused = g.value(gate.fuse(eval_ctx(g, params, store), reps));
    const auto& avg = g.value(merge_simple(g, std::span<const Value>(reps), Merge::kAverage));
    for (std::size_t i = 0; i < fused.size(); ++i) EXPECT_NEAR(fused[i], avg[i], 1e-12);
  }
}

TEST(Gate, FeatureSpecificWeightsArePerViewAndFeature) {
  Rng rng(5);
  ParameterStore<double> store;
  const GateModule<double> gate(store, "gate", Gate::kGatedFA, 5, 64, rng);
  Graph<double> g;
  const auto params = store.bind(g);
  const auto reps = random_reps(g, rng, 5, 2, 64);
  EXPECT_EQ(g.shape(gate.weights(eval_ctx(g, params, store), reps)), (Shape{2, 5, 64}));
}

TEST(Gate, IdenticalRepresentationsFuseToThemselves) {
  Rng rng(6);
  for (Gate type : {Gate::kGatedC, Gate::kGatedA, Gate::kGatedFA}) {
    ParameterStore<double> store;
    const GateModule<double> gate(store, "gate", type, 3, 4, rng);
    randomize(store, rng);
    Graph<double> g;
    const auto params = store.bind(g);
    const Value h = g.constant(random_tensor(rng, Shape{2, 4}, -3, 3));
    const std::vector<Value> same{h, h, h};
    const auto& fused = g.value(gate.fuse(eval_ctx(g, params, store), same));
    for (std::size_t i = 0; i < fused.size(); ++i) EXPECT_NEAR(fused[i], g.value(h)[i], 1e-6);
  }
}

TEST(Gate, OneHotWeightsSelectAView) {
  Rng rng(7);
  Graph<double> g;
  const auto reps = random_reps(g, rng, 3, 2, 4);
  Tensor<double> w(Shape{2, 3});
  w.at(0, 1) = 1.0;
  w.at(1, 2) = 1.0;
  const auto& fused = g.value(fuse_weighted(g, std::span<const Value>(reps), g.constant(w)));
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(fused.at(0, k), g.value(reps[1]).at(0, k));
    EXPECT_EQ(fused.at(1, k), g.value(reps[2]).at(1, k));
  }
}

// ---- models

TEST(Model, ConfigValidation) {
  auto c = tiny_config(Method::kInput);
  c.merge = Merge::kAverage;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config(Method::kFeatureS);
  c.merge.reset();
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config(Method::kFeatureG);
  c.gate.reset();
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config(Method::kMultiLoss);
  c.aux_weight = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config(Method::kFeatureS);
  c.views.resize(1);
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(FusionModel<double>(tiny_config(Method::kEnsemble)), ContractError);
}

TEST(Model, TagsRoundTrip) {
  for (Method m : kAllMethods) EXPECT_EQ(parse_method(to_string(m)), m);
  for (Merge m : {Merge::kAverage, Merge::kMaximum, Merge::kProduct, Merge::kConcatenate})
    EXPECT_EQ(parse_merge(to_string(m)), m);
  for (Gate t : {Gate::kGatedC, Gate::kGatedA, Gate::kGatedFA})
    EXPECT_EQ(parse_gate(to_string(t)), t);
  EXPECT_THROW(parse_method("late"), ConfigError);
}

TEST(Model, InputFusionChannelCountForDefaultViews) {
  FusionModelConfig c;
  c.method = Method::kInput;
  c.views = {{"optical", 11, 12, false, ""}, {"radar", 2, 12, false, ""},
             {"weather", 2, 12, false, ""}, {"ndvi", 1, 12, false, ""},
             {"dem", 2, 0, true, ""}};
  EXPECT_EQ(c.total_channels(), 18u);
  const FusionModel<float> m(c);
  EXPECT_EQ(m.store().parameter(0).shape(), (Shape{18, 3 * 64}));
}

TEST(Model, EqualConfigsGiveEqualParameters) {
  for (Method m : {Method::kInput, Method::kFeatureS, Method::kFeatureG, Method::kDecision,
                   Method::kMultiLoss}) {
    EXPECT_EQ(FusionModel<float>(tiny_config(m)).store(),
              FusionModel<float>(tiny_config(m)).store());
  }
}

TEST(Model, WrongViewInputsAreAConfigError) {
  Rng rng(8);
  const FusionModel<double> model(tiny_config(Method::kFeatureS));
  Graph<double> g;
  const auto params = model.store().bind(g);
  const auto f = eval_ctx(g, params, model.store());
  auto inputs = constants(g, tiny_inputs(rng, model.config(), 2));
  inputs.pop_back();
  EXPECT_THROW(model.forward(f, inputs), ConfigError);
  inputs.push_back(g.constant(Tensor<double>(Shape{2, 4, 2})));  // static view given as temporal
  EXPECT_THROW(model.forward(f, inputs), ConfigError);
}

TEST(Model, MultilossReturnsOnePlusVProbabilities) {
  Rng rng(9);
  const FusionModel<double> model(tiny_config(Method::kMultiLoss));
  Graph<double> g;
  const auto params = model.store().bind(g);
  const auto out =
      model.forward(eval_ctx(g, params, model.store()), constants(g, tiny_inputs(rng, model.config(), 3)));
  ASSERT_EQ(out.aux.size(), 3u);
  std::vector<Value> all = out.aux;
  all.push_back(out.probability);
  for (Value p : all) {
    EXPECT_EQ(g.shape(p), (Shape{3}));
    for (double x : g.value(p).values()) {
      EXPECT_GT(x, 0.0);
      EXPECT_LT(x, 1.0);
    }
  }
}

TEST(Model, DecisionWithIdenticalBranchesEqualsOneBranch) {
  Rng rng(10);
  auto c = tiny_config(Method::kDecision);
  c.views = {{"a", 2, 4, false, ""}, {"b", 2, 4, false, ""}, {"c", 2, 4, false, ""}};
  FusionModel<double> model(c);
  auto& params = model.store().parameters();
  const std::size_t per = params.size() / 3;
  for (std::size_t v = 1; v < 3; ++v)
    for (std::size_t i = 0; i < per; ++i) params[v * per + i].value = params[i].value;
  FusionModel<double> single(single_view_config(c, c.views[0], 1));
  for (std::size_t i = 0; i < per; ++i) single.store().parameter(i) = params[i].value;

  const Tensor<double> x = random_tensor(rng, Shape{2, 4, 2});
  Graph<double> g;
  const auto pd = model.store().bind(g);
  const auto ps = single.store().bind(g);
  const std::vector<Value> three{g.constant(x), g.constant(x), g.constant(x)};
  const std::vector<Value> one{g.constant(x)};
  const auto& a = g.value(model.forward(eval_ctx(g, pd, model.store()), three).probability);
  const auto& b = g.value(single.forward(eval_ctx(g, ps, single.store()), one).probability);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(a[i], b[i], 1e-15);
}

// ---- end-to-end gradients of the training loss

class MethodGrad : public ::testing::TestWithParam<const char*> {};

TEST_P(MethodGrad, TrainingLossPassesGradCheck) {
  static const auto cases = testing::method_grad_cases();
  const auto it = std::find_if(cases.begin(), cases.end(),
                               [&](const auto& c) { return c.group == GetParam(); });
  ASSERT_NE(it, cases.end());
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto rep = testing::run_case(*it, seed).report;
    EXPECT_TRUE(rep.pass) << "max rel err " << rep.max_relative_error << " at input "
                          << rep.worst_input << "[" << rep.worst_index << "]";
  }
}

INSTANTIATE_TEST_SUITE_P(AllTrainable, MethodGrad,
                         ::testing::Values("input", "decision", "multiloss", "feature-s/average",
                                           "feature-s/maximum", "feature-s/product",
                                           "feature-s/concatenate", "feature-g/gated-c",
                                           "feature-g/gated-a", "feature-g/gatedf-a"));

// ---- ensemble

TEST(Ensemble, AverageProbabilities) {
  const std::vector<std::vector<double>> p{{0.2}, {0.4}, {0.9}};
  EXPECT_NEAR(average_probabilities<double>(p)[0], 0.5, 1e-15);
  const std::vector<std::vector<double>> one{{0.3, 0.7}};
  EXPECT_EQ(average_probabilities<double>(one), one[0]);
}

TEST(Ensemble, MeanLiesWithinMemberRange) {
  Rng rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> p(4, std::vector<double>(5));
    for (auto& v : p)
      for (double& x : v) x = u(rng);
    const auto m = average_probabilities<double>(p);
    for (std::size_t i = 0; i < 5; ++i) {
      double lo = 1, hi = 0;
      for (const auto& v : p) lo = std::min(lo, v[i]), hi = std::max(hi, v[i]);
      EXPECT_GE(m[i], lo);
      EXPECT_LE(m[i], hi);
    }
  }
}

MultiViewDataset small_dataset() {
  SynthConfig sc;
  sc.num_samples = 40;
  sc.timesteps = 4;
  sc.seed = 3;
  sc.views = {{"a", 2, false, 0.8}, {"b", 1, false, 0.5}, {"c", 2, true, 0.0}};
  return synth_generate(sc);
}

TEST(Ensemble, MatchesDecisionForwardUnderSharedParameters) {
  const auto d = small_dataset();
  auto c = tiny_config(Method::kDecision);
  c.views = d.view_specs();
  FusionModel<float> decision(c);
  Rng rng(12);
  std::normal_distribution<float> shift(0.0f, 0.3f);
  for (auto& e : decision.store().buffers())
    for (float& x : e.value.values()) x = e.name.ends_with("running_var") ? 1.5f : shift(rng);

  std::vector<FusionModel<float>> members;
  std::size_t p = 0, b = 0;
  for (std::size_t v = 0; v < c.views.size(); ++v) {
    FusionModel<float> m(single_view_config(c, c.views[v], 99 + v));
    for (auto& e : m.store().parameters()) e.value = decision.store().parameter(p++);
    for (auto& e : m.store().buffers()) e.value = decision.store().buffer(b++);
    members.push_back(std::move(m));
  }
  ASSERT_EQ(p, decision.store().parameters().size());
  ASSERT_EQ(b, decision.store().buffers().size());

  std::vector<std::size_t> rows(d.num_samples());
  std::iota(rows.begin(), rows.end(), 0);
  const auto ens = ensemble_predict<float>(members, c.views, d, rows);
  const auto dec = decision.predict(d, rows);
  ASSERT_EQ(ens.size(), dec.size());
  for (std::size_t i = 0; i < ens.size(); ++i) EXPECT_EQ(ens[i], dec[i]);

  // and equals the arithmetic mean of the branch probabilities
  std::vector<std::vector<float>> branch;
  for (const auto& m : members) branch.push_back(m.predict(d, rows));
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const double mean = (double(branch[0][i]) + branch[1][i] + branch[2][i]) / 3.0;
    EXPECT_NEAR(ens[i], mean, 1e-6);
  }
}

TEST(Ensemble, MissingViewModelIsAConfigError) {
  const auto d = small_dataset();
  const auto c = tiny_config(Method::kEnsemble);
  std::vector<FusionModel<float>> members;
  members.emplace_back(single_view_config(c, d.view_specs()[0], 1));
  const std::vector<std::size_t> rows{0, 1};
  const auto specs = d.view_specs();
  EXPECT_THROW(ensemble_predict<float>(members, specs, d, rows), ConfigError);
  const std::vector<ViewSpec> first{specs[0]};
  EXPECT_EQ(ensemble_predict<float>(members, first, d, rows), members[0].predict(d, rows));
}

}  // namespace
}  // namespace mvfusion
