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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mvfusion/errors.hpp"
#include "mvfusion/graph.hpp"

namespace mvfusion {

struct GradCheckReport {
  double max_relative_error = 0.0;
  bool pass = true;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

// Compares reverse-mode gradients of a scalar function against central
// differences (f(x+h) - f(x-h)) / 2h, componentwise over every input tensor.
//
// `f` is called as f(graph, inputs) where `inputs` are parameter leaves holding
// the evaluation point; it must return a scalar Value of that graph. The
// relative error of a component is |a - b| / max(|a|, |b|, 1e-8).
template <class F>
GradCheckReport grad_check(F&& f, std::span<const Tensor<double>> points,
                           double step, double tolerance) {
  auto evaluate = [&](const std::vector<Tensor<double>>& at, bool with_grad,
                      std::vector<Tensor<double>>* grads) {
    Graph<double> g;
    std::vector<Value> leaves;
    leaves.reserve(at.size());
    for (const auto& t : at) leaves.push_back(g.parameter(t));
    const Value out = f(g, std::span<const Value>(leaves));
    const Tensor<double>& y = g.value(out);
    if (y.size() != 1) throw ContractError("grad_check: function is not scalar");
    const double v = y[0];
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite value");
    if (with_grad) {
      g.backward(out);
      grads->clear();
      for (Value l : leaves) grads->push_back(g.grad(l));
    }
    return v;
  };

  std::vector<Tensor<double>> at(points.begin(), points.end());
  std::vector<Tensor<double>> analytic;
  evaluate(at, true, &analytic);

  GradCheckReport report;
  for (std::size_t k = 0; k < at.size(); ++k) {
    for (std::size_t i = 0; i < at[k].size(); ++i) {
      const double saved = at[k][i];
      at[k][i] = saved + step;
      const double up = evaluate(at, false, nullptr);
      at[k][i] = saved - step;
      const double down = evaluate(at, false, nullptr);
      at[k][i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[k][i];
      if (!std::isfinite(a) || !std::isfinite(numeric))
        throw NumericError("grad_check: non-finite gradient");
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (report.checked == 1 || rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_input = k;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  report.pass = report.max_relative_error < tolerance;
  return report;
}

template <class F>
GradCheckReport grad_check(F&& f, const Tensor<double>& point, double step,
                           double tolerance) {
  return grad_check(
      [&](Graph<double>& g, std::span<const Value> in) { return f(g, in[0]); },
      std::span<const Tensor<double>>(&point, 1), step, tolerance);
}

}  // namespace mvfusion
