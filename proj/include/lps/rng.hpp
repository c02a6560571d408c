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

#ifndef LPS_RNG_HPP_
#define LPS_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>

#include "lps/tensor.hpp"

namespace lps {

// Named deterministic generator. Uniform draws are derived from raw 64-bit
// outputs by hand so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo + 1);
    return lo + static_cast<int>(engine_() % span);
  }

  template <typename T>
  BasicTensor<T> uniform_tensor(const Shape& shape, double lo, double hi) {
    BasicTensor<T> t(shape);
    for (auto& v : t.storage()) v = static_cast<T>(uniform(lo, hi));
    return t;
  }

  // Derives an independent child generator.
  Rng fork() { return Rng(engine_() ^ 0x9E3779B97F4A7C15ULL); }

 private:
  std::mt19937_64 engine_;
};

// Xavier-uniform initialisation for a conv weight (out, in, kh, kw).
template <typename T>
BasicTensor<T> xavier_uniform(Rng& rng, const Shape& shape) {
  int fan_in = 1, fan_out = 1;
  if (shape.size() == 4) {
    const int rf = shape[2] * shape[3];
    fan_in = shape[1] * rf;
    fan_out = shape[0] * rf;
  } else if (!shape.empty()) {
    fan_in = fan_out = static_cast<int>(shape_numel(shape));
  }
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return rng.uniform_tensor<T>(shape, -a, a);
}

}  // namespace lps

#endif  // LPS_RNG_HPP_
