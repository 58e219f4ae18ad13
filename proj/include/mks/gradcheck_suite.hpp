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

#ifndef MKS_GRADCHECK_SUITE_HPP_
#define MKS_GRADCHECK_SUITE_HPP_

#include <functional>
#include <string>
#include <vector>

#include "mks/gradcheck.hpp"

namespace mks {

// A registered finite-difference check on a small, fixed-seed instance.
struct GradCheckUnit {
  std::string name;
  bool is_module = false;
  double tolerance = 1e-6;
  // perturb scales the analytic gradient of the first input by 1.01.
  std::function<GradCheckReport(bool perturb)> run;
};

const std::vector<GradCheckUnit>& gradcheck_units();

// scope is "all", "ops", "modules" or a unit name. Throws ConfigError
// ("scope") for anything else.
std::vector<GradCheckReport> run_gradcheck(const std::string& scope,
                                           bool perturb = false);

}  // namespace mks

#endif  // MKS_GRADCHECK_SUITE_HPP_
