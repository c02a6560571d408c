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

#ifndef LPS_KINK_HPP_
#define LPS_KINK_HPP_

#include <cstdint>

namespace lps::kink {

// Piecewise-smooth operators (leaky ReLU, bilinear sampling, sorting) fold the
// discrete branch they took into a per-thread signature. Two evaluations with
// the same signature lie on the same smooth piece, which lets the gradient
// checker discard finite-difference stencils that straddle a kink.
//
// Recording is off unless a Scope is active, so production forwards pay one
// branch per call.
class Scope {
 public:
  Scope();
  ~Scope();
  Scope(const Scope&) = delete;
  Scope& operator=(const Scope&) = delete;

  std::uint64_t signature() const;
  void reset();

 private:
  bool previous_;
  std::uint64_t saved_;
};

bool recording();
void mix(std::uint64_t value);

}  // namespace lps::kink

#endif  // LPS_KINK_HPP_
