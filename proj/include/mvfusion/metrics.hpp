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

// Evaluation metrics on a 0-100 scale and their aggregation over runs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "mvfusion/errors.hpp"

namespace mvfusion {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

template <class T>
Confusion confusion(std::span<const T> probs, std::span<const std::uint8_t> labels,
                    double threshold) {
  if (probs.size() != labels.size())
    throw ShapeError("predictions and labels differ in length");
  Confusion c;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = static_cast<double>(probs[i]) >= threshold;
    if (labels[i]) pred ? ++c.tp : ++c.fn;
    else pred ? ++c.fp : ++c.tn;
  }
  return c;
}

// Balanced accuracy: 100 * (TPR + TNR) / 2.
template <class T>
double average_accuracy(std::span<const T> probs, std::span<const std::uint8_t> labels,
                        double threshold = 0.5) {
  const Confusion c = confusion(probs, labels, threshold);
  if (c.tp + c.fn == 0 || c.tn + c.fp == 0)
    throw UndefinedMetricError("average accuracy needs both classes");
  const double tpr = double(c.tp) / double(c.tp + c.fn);
  const double tnr = double(c.tn) / double(c.tn + c.fp);
  return 100.0 * (tpr + tnr) / 2.0;
}

// Mann-Whitney AUC: fraction of positive/negative pairs ranked correctly,
// ties counted as one half. O(N log N) via sorting.
template <class T>
double auc(std::span<const T> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::uint64_t correct = 0, ties = 0, negatives_below = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t group_pos = 0, group_neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      labels[order[j]] ? ++group_pos : ++group_neg;
      ++j;
    }
    correct += group_pos * negatives_below;
    ties += group_pos * group_neg;
    negatives_below += group_neg;
    pos += group_pos;
    neg += group_neg;
    i = j;
  }
  if (pos == 0 || neg == 0) throw UndefinedMetricError("AUC needs both classes");
  return 100.0 * (static_cast<double>(correct) + 0.5 * static_cast<double>(ties)) /
         (static_cast<double>(pos) * static_cast<double>(neg));
}

// F1 of the positive class, 2PR / (P + R) = 2TP / (2TP + FP + FN); 0 when
// there are no true positives.
template <class T>
double binary_f1(std::span<const T> probs, std::span<const std::uint8_t> labels,
                 double threshold = 0.5) {
  const Confusion c = confusion(probs, labels, threshold);
  if (c.tp == 0) return 0.0;
  return 100.0 * double(2 * c.tp) / double(2 * c.tp + c.fp + c.fn);
}

// Binary entropy in bits with 0 log 0 = 0.
inline double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
  return h;
}

// 100 * mean binary entropy of the predicted positive-class probabilities.
template <class T>
double prediction_entropy(std::span<const T> probs) {
  if (probs.empty()) throw UndefinedMetricError("entropy of no predictions");
  double sum = 0.0;
  for (T p : probs) {
    const double q = static_cast<double>(p);
    if (!(q >= 0.0 && q <= 1.0)) throw NumericError("probability outside [0,1]");
    sum += binary_entropy(q);
  }
  return 100.0 * sum / static_cast<double>(probs.size());
}

// 100 (a - b) / b
inline double relative_improvement(double a, double b) {
  if (b == 0.0) throw UndefinedMetricError("relative improvement against zero");
  return 100.0 * (a - b) / b;
}

inline long long round_half_up(double x) { return static_cast<long long>(std::floor(x + 0.5)); }

struct RunMetrics {
  double aa = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  double entropy = 0.0;
};

template <class T>
RunMetrics evaluate_predictions(std::span<const T> probs, std::span<const std::uint8_t> labels,
                                double threshold = 0.5) {
  return {average_accuracy(probs, labels, threshold), auc(probs, labels),
          binary_f1(probs, labels, threshold), prediction_entropy(probs)};
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Arithmetic mean and sample standard deviation (n - 1); std is 0 for n = 1.
inline MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) throw UndefinedMetricError("aggregate of no values");
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / double(xs.size());
  if (xs.size() == 1) return {mean, 0.0};
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / double(xs.size() - 1))};
}

struct MetricsReport {
  MeanStd aa, auc, f1, entropy;
  std::size_t runs = 0;
};

inline MetricsReport aggregate(std::span<const RunMetrics> runs) {
  if (runs.empty()) throw UndefinedMetricError("aggregate of no runs");
  std::vector<double> aa, au, f1, en;
  for (const auto& r : runs) {
    aa.push_back(r.aa);
    au.push_back(r.auc);
    f1.push_back(r.f1);
    en.push_back(r.entropy);
  }
  return {mean_std(aa), mean_std(au), mean_std(f1), mean_std(en), runs.size()};
}

}  // namespace mvfusion
