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

// Comparison tables (markdown and CSV) built from run results.

#include <algorithm>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "mvfusion/errors.hpp"
#include "mvfusion/metrics.hpp"
#include "mvfusion/training.hpp"

namespace mvfusion {

struct SectionSummary {
  std::string label;  // "feature-s (average)", "optical", ...
  bool single_view = false;
  MetricsReport metrics;
  std::size_t failed = 0;
  bool top3_aa = false, top3_auc = false, top3_f1 = false;
};

struct Report {
  std::vector<SectionSummary> sections;  // first-appearance order
  struct Improvement {
    std::string against;  // "best single-view" or "worst single-view"
    std::string fusion_label, single_label;
    double fusion_aa = 0.0, single_aa = 0.0, percent = 0.0;
  };
  std::vector<Improvement> improvements;
};

inline std::string format_fixed(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

inline std::string format_mean_std(const MeanStd& m) {
  return format_fixed(m.mean, 2) + " ± " + format_fixed(m.std, 2);
}

// "+5.6%" style, one decimal.
inline std::string format_improvement(double percent) {
  const std::string s = format_fixed(percent, 1);
  return (percent >= 0.0 ? "+" : "") + s + "%";
}

inline std::string section_label(const TrainRunResult& r) {
  if (r.section.rfind("single:", 0) == 0) return r.section.substr(7);
  std::string label = r.section;
  if (r.merge) label += " (" + std::string(to_string(*r.merge)) + ")";
  if (r.gate) label += " (" + std::string(to_string(*r.gate)) + ")";
  return label;
}

namespace detail {

// Flags the rows whose displayed (2-decimal) mean has fewer than three
// strictly better rows.
template <class Get, class Set>
void flag_top3(std::vector<SectionSummary*>& rows, Get get, Set set) {
  for (auto* a : rows) {
    const double va = std::stod(format_fixed(get(*a), 2));
    std::size_t better = 0;
    for (auto* b : rows)
      if (std::stod(format_fixed(get(*b), 2)) > va) ++better;
    set(*a, better < 3);
  }
}

}  // namespace detail

inline Report build_report(std::span<const TrainRunResult> results) {
  if (results.empty()) throw ConfigError("no results to report");
  std::vector<std::string> order;
  std::vector<std::vector<TrainRunResult>> groups;
  for (const auto& r : results) {
    const std::string key = section_label(r);
    auto it = std::find(order.begin(), order.end(), key);
    if (it == order.end()) {
      order.push_back(key);
      groups.emplace_back();
      it = order.end() - 1;
    }
    groups[std::size_t(it - order.begin())].push_back(r);
  }
  Report rep;
  for (std::size_t i = 0; i < order.size(); ++i) {
    SectionSummary s;
    s.label = order[i];
    s.single_view = groups[i][0].section.rfind("single:", 0) == 0;
    for (const auto& r : groups[i]) s.failed += r.ok ? 0 : 1;
    if (s.failed == groups[i].size()) {
      s.metrics.runs = 0;
    } else {
      s.metrics = aggregate(std::span<const TrainRunResult>(groups[i]));
    }
    rep.sections.push_back(std::move(s));
  }

  std::vector<SectionSummary*> fusion, single;
  for (auto& s : rep.sections) {
    if (s.metrics.runs == 0) continue;
    (s.single_view ? single : fusion).push_back(&s);
  }
  auto& ranked = fusion.empty() ? single : fusion;
  detail::flag_top3(ranked, [](const SectionSummary& s) { return s.metrics.aa.mean; },
                    [](SectionSummary& s, bool f) { s.top3_aa = f; });
  detail::flag_top3(ranked, [](const SectionSummary& s) { return s.metrics.auc.mean; },
                    [](SectionSummary& s, bool f) { s.top3_auc = f; });
  detail::flag_top3(ranked, [](const SectionSummary& s) { return s.metrics.f1.mean; },
                    [](SectionSummary& s, bool f) { s.top3_f1 = f; });

  if (!fusion.empty() && !single.empty()) {
    auto by_aa = [](const SectionSummary* a, const SectionSummary* b) {
      return a->metrics.aa.mean < b->metrics.aa.mean;
    };
    const auto* best_fusion = *std::max_element(fusion.begin(), fusion.end(), by_aa);
    const auto* best_single = *std::max_element(single.begin(), single.end(), by_aa);
    const auto* worst_single = *std::min_element(single.begin(), single.end(), by_aa);
    for (auto [name, s] : {std::pair{"best single-view", best_single},
                           std::pair{"worst single-view", worst_single}}) {
      if (s->metrics.aa.mean == 0.0) continue;
      rep.improvements.push_back({name, best_fusion->label, s->label,
                                  best_fusion->metrics.aa.mean, s->metrics.aa.mean,
                                  relative_improvement(best_fusion->metrics.aa.mean,
                                                       s->metrics.aa.mean)});
    }
  }
  return rep;
}

inline std::string render_markdown(const Report& rep) {
  auto cell = [](const SectionSummary& s, const MeanStd& m, bool top) {
    if (s.metrics.runs == 0) return std::string("n/a");
    const std::string text = format_mean_std(m);
    return top ? "**" + text + "**" : text;
  };
  auto table = [&](bool single_view, const char* title) {
    std::string out;
    for (const auto& s : rep.sections) {
      if (s.single_view != single_view) continue;
      if (out.empty())
        out = std::string("## ") + title +
              "\n\n| Method | Runs | AA | AUC | F1 | Entropy |\n"
              "|---|---|---|---|---|---|\n";
      out += "| " + s.label + " | " + std::to_string(s.metrics.runs);
      if (s.failed) out += " (" + std::to_string(s.failed) + " failed)";
      out += " | " + cell(s, s.metrics.aa, s.top3_aa) + " | " +
             cell(s, s.metrics.auc, s.top3_auc) + " | " + cell(s, s.metrics.f1, s.top3_f1) +
             " | " + cell(s, s.metrics.entropy, false) + " |\n";
    }
    return out.empty() ? out : out + "\n";
  };
  std::string md = "# Results\n\n";
  md += table(true, "Single-view models");
  md += table(false, "Fusion methods");
  md += "Bold marks the top three per metric (AA, AUC, F1). Values are mean ± sample std.\n";
  if (!rep.improvements.empty()) {
    md += "\n## Relative improvement in AA\n\n";
    for (const auto& imp : rep.improvements)
      md += "- " + imp.fusion_label + " vs " + imp.against + " (" + imp.single_label +
            "): " + format_improvement(imp.percent) + " (" + format_fixed(imp.fusion_aa, 2) +
            " vs " + format_fixed(imp.single_aa, 2) + ")\n";
  }
  return md;
}

inline std::string render_csv(const Report& rep) {
  std::string csv =
      "method,single_view,runs,failed,aa_mean,aa_std,auc_mean,auc_std,f1_mean,f1_std,"
      "entropy_mean,entropy_std,aa_top3,auc_top3,f1_top3\n";
  for (const auto& s : rep.sections) {
    const auto& m = s.metrics;
    auto pair = [&](const MeanStd& v) {
      return m.runs ? format_fixed(v.mean, 2) + "," + format_fixed(v.std, 2) : std::string(",");
    };
    csv += s.label + "," + (s.single_view ? "1" : "0") + "," + std::to_string(m.runs) + "," +
           std::to_string(s.failed) + "," + pair(m.aa) + "," + pair(m.auc) + "," + pair(m.f1) +
           "," + pair(m.entropy) + "," + (s.top3_aa ? "1" : "0") + "," +
           (s.top3_auc ? "1" : "0") + "," + (s.top3_f1 ? "1" : "0") + "\n";
  }
  return csv;
}

}  // namespace mvfusion
