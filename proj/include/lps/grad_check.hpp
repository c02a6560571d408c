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

#ifndef LPS_GRAD_CHECK_HPP_
#define LPS_GRAD_CHECK_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "lps/autodiff.hpp"

namespace lps {

struct GradCheckOptions {
  double eps = 1e-3;
  // Coordinates probed per input; 0 probes every coordinate.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
  // Skip stencils whose +/- evaluations land on different smooth pieces.
  bool skip_kinks = true;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

// A differentiable map from input leaves to an output. Non-scalar outputs are
// reduced with fixed pseudo-random weights before differentiation.
template <typename T>
using GradFn = std::function<Var<T>(const std::vector<Var<T>>&)>;

// Compares central differences (f(x+e) - f(x-e)) / 2e against the analytic
// gradient for every input. Relative error is |a - n| / max(|a|, |n|, floor)
// where floor is 1e-6 or a multiple of the stencil roundoff,
// 2^17 * machine_eps * max(1, sum |w * y|) / eps, whichever is larger, with
// w the reduction weights and y the unreduced output.
template <typename T>
GradCheckResult grad_check(const GradFn<T>& f, const std::vector<BasicTensor<T>>& inputs,
                           const GradCheckOptions& opt = {});

// Same check over every parameter of a store; f builds the output from the
// store's current values, which the checker perturbs in place.
template <typename T>
GradCheckResult grad_check_params(const std::function<Var<T>()>& f, ParamStore<T>& store,
                                  const GradCheckOptions& opt = {});

double relative_error(double analytic, double numeric, double floor = 1e-6);

}  // namespace lps

#endif  // LPS_GRAD_CHECK_HPP_
