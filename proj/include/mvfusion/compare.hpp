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

// Runs every fusion method plus per-view single-view baselines on one
// dataset. The ensemble section is built from the single-view models of the
// same run, so nothing is trained twice.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mvfusion/datamodel.hpp"
#include "mvfusion/errors.hpp"
#include "mvfusion/fusion.hpp"
#include "mvfusion/training.hpp"

namespace mvfusion {

struct CompareConfig {
  FusionModelConfig base;  // views, encoder, head, regularization, aux weight
  Merge merge = Merge::kAverage;
  Gate gate = Gate::kGatedFA;
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
};

inline FusionModelConfig method_config(const CompareConfig& cc, Method m) {
  FusionModelConfig c = cc.base;
  c.method = m;
  c.merge.reset();
  c.gate.reset();
  if (m == Method::kFeatureS) c.merge = cc.merge;
  if (m == Method::kFeatureG) c.gate = cc.gate;
  return c;
}

namespace detail {

template <class Fn>
void guarded_run(const FusionModelConfig& cfg, std::vector<TrainRunResult>& out, std::size_t run,
                 const LogFn& log, Fn&& fn) {
  try {
    fn();
  } catch (const NumericError& e) {
    TrainRunResult failed = describe_run(cfg);
    failed.ok = false;
    failed.error = e.what();
    if (log) log(failed.section + " run " + std::to_string(run) + " failed: " + e.what());
    out.push_back(std::move(failed));
  }
}

}  // namespace detail

// Result order: single-view sections (view order), then methods in the
// order given; within a section, runs in seed order.
inline std::vector<TrainRunResult> run_comparison(const CompareConfig& cc, const TrainConfig& tc,
                                                  const MultiViewDataset& d,
                                                  const ExperimentHooks& hooks = {}) {
  tc.validate();
  if (cc.methods.empty()) throw ConfigError("no methods to compare");
  for (Method m : cc.methods)
    if (m != Method::kEnsemble) method_config(cc, m).validate();
  const Splits splits = resolve_splits(d, tc);
  const auto& views = cc.base.views;

  // members[run][view]; empty optional marks a failed branch
  std::vector<std::vector<std::optional<TrainedModel<float>>>> members(tc.runs);
  std::vector<std::vector<TrainRunResult>> single(views.size());
  for (std::size_t v = 0; v < views.size(); ++v) {
    for (std::size_t r = 0; r < tc.runs; ++r) {
      const auto cfg =
          single_view_config(cc.base, views[v], member_seed(tc.base_seed + r, v));
      members[r].emplace_back();
      detail::guarded_run(cfg, single[v], r, hooks.log, [&] {
        auto trained = train_model<float>(cfg, tc, d, splits, hooks.log);
        if (hooks.on_model) hooks.on_model(r, trained);
        single[v].push_back(trained.result);
        members[r][v] = std::move(trained);
      });
    }
  }
  std::vector<TrainRunResult> results;
  for (const auto& s : single) results.insert(results.end(), s.begin(), s.end());

  for (Method m : cc.methods) {
    for (std::size_t r = 0; r < tc.runs; ++r) {
      FusionModelConfig cfg = method_config(cc, m);
      cfg.seed = tc.base_seed + r;
      if (m == Method::kEnsemble) {
        bool complete = true;
        std::vector<TrainedModel<float>> branch;
        for (auto& mm : members[r]) {
          if (!mm) complete = false;
          else branch.push_back(*mm);
        }
        if (!complete) {
          TrainRunResult failed = describe_run(cfg);
          failed.ok = false;
          failed.error = "a single-view branch failed";
          results.push_back(std::move(failed));
          continue;
        }
        if (hooks.log)
          hooks.log("ensemble run " + std::to_string(r) + ": reusing " +
                    std::to_string(branch.size()) + " single-view models");
        TrainRunResult res = ensemble_result<float>(branch, cfg, tc, d, splits);
        for (const auto& b : branch) res.wall_time_s += b.result.wall_time_s;
        results.push_back(std::move(res));
        continue;
      }
      detail::guarded_run(cfg, results, r, hooks.log, [&] {
        auto trained = train_model<float>(cfg, tc, d, splits, hooks.log);
        if (hooks.on_model) hooks.on_model(r, trained);
        results.push_back(trained.result);
      });
    }
  }
  return results;
}

}  // namespace mvfusion
