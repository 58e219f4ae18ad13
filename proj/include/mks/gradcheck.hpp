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

#ifndef MKS_GRADCHECK_HPP_
#define MKS_GRADCHECK_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mks/tensor.hpp"

namespace mks {

struct GradCheckOptions {
  double eps = 1e-4;
  double tolerance = 1e-6;
  // Denominator floor of the relative error, so gradients that are zero up
  // to rounding are compared absolutely.
  double floor = 1e-3;
  std::uint64_t seed = 0x5eed;
};

// A differentiable map from named double-precision tensors to one output.
// `inputs` point at storage that `forward` reads; the checker perturbs it in
// place and restores it. `backward` returns one gradient per input, in
// order, for the given upstream gradient, evaluated at the unperturbed point.
struct GradCheckCase {
  struct Input {
    std::string name;
    Tensor<double>* value;
  };
  std::vector<Input> inputs;
  std::function<Tensor<double>()> forward;
  std::function<std::vector<Tensor<double>>(const Tensor<double>&)> backward;
};

struct GradCheckReport {
  std::string unit;
  double max_rel_error = 0.0;
  std::string worst_input;
  std::int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::int64_t elements_checked = 0;
  bool passed = false;
};

// Contracts the output with a fixed random tensor R (seeded) to the scalar
// L = <R, f(x)>, then compares backward(R) with central differences of L
// for every element of every input. Relative error per element is
// |a - n| / max(|a|, |n|, floor).
GradCheckReport gradcheck(const std::string& unit, const GradCheckCase& c,
                          const GradCheckOptions& options = {});

}  // namespace mks

#endif  // MKS_GRADCHECK_HPP_
