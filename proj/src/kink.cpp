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

#include "lps/kink.hpp"

namespace lps::kink {
namespace {

thread_local bool g_active = false;
thread_local std::uint64_t g_state = 0;

constexpr std::uint64_t kOffset = 1469598103934665603ULL;
constexpr std::uint64_t kPrime = 1099511628211ULL;

}  // namespace

Scope::Scope() : previous_(g_active), saved_(g_state) {
  g_active = true;
  g_state = kOffset;
}

Scope::~Scope() {
  g_active = previous_;
  g_state = saved_;
}

std::uint64_t Scope::signature() const { return g_state; }

void Scope::reset() { g_state = kOffset; }

bool recording() { return g_active; }

void mix(std::uint64_t value) {
  // FNV-1a over the eight bytes of the value.
  for (int i = 0; i < 8; ++i) {
    g_state ^= (value >> (8 * i)) & 0xFFu;
    g_state *= kPrime;
  }
}

}  // namespace lps::kink
