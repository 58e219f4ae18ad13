/*
 * Copyright 2026 The mkslib Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "mks/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mks/rng.hpp"

namespace mks {
namespace {

double contract(const Tensor<double>& r, const Tensor<double>& y) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < y.numel(); ++i) acc += r[i] * y[i];
  return acc;
}

}  // namespace

GradCheckReport gradcheck(const std::string& unit, const GradCheckCase& c,
                          const GradCheckOptions& options) {
  GradCheckReport report;
  report.unit = unit;

  const Tensor<double> y0 = c.forward();
  Tensor<double> projection(y0.shape());
  Rng rng(options.seed);
  for (auto& v : projection.data()) v = rng.uniform(-1.0, 1.0);

  const std::vector<Tensor<double>> analytic = c.backward(projection);
  if (analytic.size() != c.inputs.size()) {
    throw ShapeError(unit + ": backward returned " +
                     std::to_string(analytic.size()) + " gradients for " +
                     std::to_string(c.inputs.size()) + " inputs");
  }

  for (std::size_t k = 0; k < c.inputs.size(); ++k) {
    Tensor<double>& x = *c.inputs[k].value;
    require_same_shape(analytic[k].shape(), x.shape(),
                       (unit + " gradient of " + c.inputs[k].name).c_str());
    for (std::int64_t i = 0; i < x.numel(); ++i) {
      const double saved = x[i];
      x[i] = saved + options.eps;
      const double plus = contract(projection, c.forward());
      x[i] = saved - options.eps;
      const double minus = contract(projection, c.forward());
      x[i] = saved;

      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double a = analytic[k][i];
      const double denom =
          std::max({std::abs(a), std::abs(numeric), options.floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.elements_checked;
      if (rel > report.max_rel_error || report.worst_index < 0) {
        report.max_rel_error = rel;
        report.worst_input = c.inputs[k].name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace mks
