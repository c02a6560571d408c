// Copyright 2026 The lpskit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Finite-difference checks of every differentiable operator over randomised
// shapes and values, run in double precision.

#ifndef LPS_GRAD_SUITE_HPP_
#define LPS_GRAD_SUITE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "lps/grad_check.hpp"

namespace lps {

struct OpGradReport {
  std::string op;
  int seeds = 0;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double seconds = 0.0;
};

// Operator names in suite order.
const std::vector<std::string>& gradient_suite_ops();

// Runs `seeds` randomised checks per operator, seeded from base_seed. An
// empty `only` runs everything; unknown names raise kValidation.
std::vector<OpGradReport> run_gradient_suite(int seeds, std::uint64_t base_seed,
                                             const std::vector<std::string>& only = {},
                                             const GradCheckOptions& opt = {.eps = 1e-4});

}  // namespace lps

#endif  // LPS_GRAD_SUITE_HPP_
