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
#include <string>
#include <vector>

#include "mvfusion/report.hpp"

namespace mvfusion {
namespace {

TrainRunResult run(std::string section, Method m, double aa, std::uint64_t seed = 0) {
  TrainRunResult r;
  r.section = std::move(section);
  r.method = m;
  if (m == Method::kFeatureS) r.merge = Merge::kAverage;
  if (m == Method::kFeatureG) r.gate = Gate::kGatedFA;
  r.seed = seed;
  r.metrics = {aa, aa + 10.0, aa - 5.0, 40.0};
  return r;
}

bool contains(const std::string& s, const std::string& sub) {
  return s.find(sub) != std::string::npos;
}

TEST(Format, ImprovementAndMeanStd) {
  EXPECT_EQ(format_improvement(relative_improvement(66.5, 63.0)), "+5.6%");
  EXPECT_EQ(format_improvement(-3.25), "-3.2%");
  EXPECT_EQ(format_mean_std({65.0, 7.0710678}), "65.00 ± 7.07");
}

TEST(Report, ImprovementLinesAgainstBestAndWorstSingle) {
  const std::vector<TrainRunResult> rs{run("single:optical", Method::kInput, 63.0),
                                       run("single:dem", Method::kInput, 48.0),
                                       run("feature-s", Method::kFeatureS, 66.5),
                                       run("input", Method::kInput, 60.0)};
  const auto rep = build_report(rs);
  ASSERT_EQ(rep.improvements.size(), 2u);
  EXPECT_EQ(rep.improvements[0].single_label, "optical");
  EXPECT_EQ(rep.improvements[0].fusion_label, "feature-s (average)");
  EXPECT_EQ(round_half_up(rep.improvements[0].percent), 6);
  EXPECT_EQ(rep.improvements[1].single_label, "dem");
  EXPECT_EQ(round_half_up(rep.improvements[1].percent), 39);
  const auto md = render_markdown(rep);
  EXPECT_TRUE(contains(md, "+5.6%"));
  EXPECT_TRUE(contains(md, "## Single-view models"));
  EXPECT_TRUE(contains(md, "## Fusion methods"));
  EXPECT_TRUE(contains(md, "**66.50 ± 0.00**"));
}

TEST(Report, SingleMethodHasOneRowAndNoImprovements) {
  const std::vector<TrainRunResult> rs{run("feature-g", Method::kFeatureG, 70.0, 0),
                                       run("feature-g", Method::kFeatureG, 72.0, 1)};
  const auto rep = build_report(rs);
  ASSERT_EQ(rep.sections.size(), 1u);
  EXPECT_EQ(rep.sections[0].label, "feature-g (gatedf-a)");
  EXPECT_EQ(rep.sections[0].metrics.runs, 2u);
  EXPECT_DOUBLE_EQ(rep.sections[0].metrics.aa.mean, 71.0);
  EXPECT_TRUE(rep.improvements.empty());
  EXPECT_FALSE(contains(render_markdown(rep), "Relative improvement"));
  const auto csv = render_csv(rep);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(Report, TopThreeAmongFusionRowsWithTies) {
  const std::vector<TrainRunResult> rs{
      run("single:a", Method::kInput, 99.0),       run("input", Method::kInput, 80.0),
      run("decision", Method::kDecision, 81.0),    run("multiloss", Method::kMultiLoss, 82.0),
      run("feature-s", Method::kFeatureS, 80.001), run("ensemble", Method::kEnsemble, 70.0)};
  const auto rep = build_report(rs);
  std::vector<std::string> flagged;
  for (const auto& s : rep.sections)
    if (s.top3_aa) flagged.push_back(s.label);
  // 80.00 appears twice after rounding, so both share third place.
  EXPECT_EQ(flagged, (std::vector<std::string>{"input", "decision", "multiloss",
                                               "feature-s (average)"}));
}

TEST(Report, FailedRunsAreCountedNotAveraged) {
  auto bad = run("input", Method::kInput, 0.0, 1);
  bad.ok = false;
  bad.error = "diverged";
  const std::vector<TrainRunResult> rs{run("input", Method::kInput, 70.0, 0), bad};
  const auto rep = build_report(rs);
  EXPECT_EQ(rep.sections[0].failed, 1u);
  EXPECT_EQ(rep.sections[0].metrics.runs, 1u);
  EXPECT_DOUBLE_EQ(rep.sections[0].metrics.aa.mean, 70.0);
  EXPECT_TRUE(contains(render_markdown(rep), "(1 failed)"));
}

TEST(Report, DeterministicAndRejectsEmpty) {
  const std::vector<TrainRunResult> rs{run("single:x", Method::kInput, 60.0),
                                       run("decision", Method::kDecision, 64.0)};
  EXPECT_EQ(render_markdown(build_report(rs)), render_markdown(build_report(rs)));
  EXPECT_EQ(render_csv(build_report(rs)), render_csv(build_report(rs)));
  EXPECT_THROW(build_report({}), ConfigError);
}

}  // namespace
}  // namespace mvfusion
