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

#include "lps/grad_suite.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>

#include "lps/fusion.hpp"
#include "lps/heads.hpp"
#include "lps/range_ops.hpp"
#include "lps/rng.hpp"

namespace lps {
namespace {

using D = double;
using DT = BasicTensor<D>;
using DV = Var<D>;

void merge(GradCheckResult& acc, const GradCheckResult& r) {
  acc.max_rel_error = std::max(acc.max_rel_error, r.max_rel_error);
  acc.checked += r.checked;
  acc.skipped += r.skipped;
}

GradCheckOptions seeded(GradCheckOptions opt, std::uint64_t seed, std::size_t coords) {
  opt.seed = seed;
  if (opt.max_coords == 0) opt.max_coords = coords;
  return opt;
}

GradCheckResult check_conv2d(Rng& rng, const GradCheckOptions& opt) {
  const int c = rng.uniform_int(1, 3), o = rng.uniform_int(1, 3);
  const int kh = rng.uniform_int(1, 3), kw = rng.uniform_int(1, 3);
  ops::Conv2dOptions co;
  co.stride = rng.uniform_int(1, 2);
  co.dilation_h = rng.uniform_int(1, 2);
  co.dilation_w = rng.uniform_int(1, 2);
  co.padding = rng.uniform_int(0, 1) ? ops::Padding::kSame : ops::Padding::kValid;
  const int h = rng.uniform_int(5, 8), w = rng.uniform_int(5, 8);
  return grad_check<D>(
      [co](const std::vector<DV>& in) { return ops::conv2d(in[0], in[1], in[2], co); },
      {rng.uniform_tensor<D>({c, h, w}, -1, 1), rng.uniform_tensor<D>({o, c, kh, kw}, -1, 1),
       rng.uniform_tensor<D>({o}, -1, 1)},
      seeded(opt, rng.next_u64(), 0));
}

GradCheckResult check_separable(Rng& rng, const GradCheckOptions& opt) {
  const int c = rng.uniform_int(1, 3), o = rng.uniform_int(1, 3);
  const int dh = rng.uniform_int(1, 3), dw = rng.uniform_int(1, 3);
  const int h = rng.uniform_int(5, 8), w = rng.uniform_int(5, 8);
  return grad_check<D>(
      [dh, dw](const std::vector<DV>& in) {
        return ops::separable_conv(in[0], in[1], in[2], in[3], dh, dw);
      },
      {rng.uniform_tensor<D>({c, h, w}, -1, 1), rng.uniform_tensor<D>({c, 1, 3, 3}, -1, 1),
       rng.uniform_tensor<D>({o, c, 1, 1}, -1, 1), rng.uniform_tensor<D>({o}, -1, 1)},
      seeded(opt, rng.next_u64(), 0));
}

GradCheckResult check_bilinear(Rng& rng, const GradCheckOptions& opt) {
  const int c = rng.uniform_int(1, 3), h = rng.uniform_int(3, 6), w = rng.uniform_int(3, 6);
  const int ho = rng.uniform_int(2, 5), wo = rng.uniform_int(2, 5);
  const auto pad = rng.uniform_int(0, 1) ? ops::SamplePadding::kClamp : ops::SamplePadding::kZeros;
  DT coords({2, ho, wo});
  for (int i = 0; i < ho * wo; ++i) {
    coords[static_cast<std::size_t>(i)] = rng.uniform(-1.5, h + 0.5);
    coords[static_cast<std::size_t>(ho * wo + i)] = rng.uniform(-1.5, w + 0.5);
  }
  return grad_check<D>(
      [pad](const std::vector<DV>& in) { return ops::bilinear_sample(in[0], in[1], pad); },
      {rng.uniform_tensor<D>({c, h, w}, -1, 1), coords}, seeded(opt, rng.next_u64(), 0));
}

GradCheckResult check_proximity(Rng& rng, const GradCheckOptions& opt) {
  const int c = rng.uniform_int(1, 3), o = rng.uniform_int(1, 3);
  const int h = rng.uniform_int(5, 8), w = rng.uniform_int(5, 8);
  Tensor range = rng.uniform_tensor<float>({h, w}, 1, 30);
  std::vector<std::uint8_t> valid(static_cast<std::size_t>(h) * w, 1);
  for (auto& v : valid) v = rng.uniform() < 0.15 ? 0 : 1;
  const ProximityGrid grid = build_proximity_grid(range, valid, 5, 5, 9);
  return grad_check<D>(
      [grid](const std::vector<DV>& in) { return proximity_conv(in[0], grid, in[1], in[2]); },
      {rng.uniform_tensor<D>({c, h, w}, -1, 1), rng.uniform_tensor<D>({o, c, 3, 3}, -1, 1),
       rng.uniform_tensor<D>({o}, -1, 1)},
      seeded(opt, rng.next_u64(), 0));
}

// Checks a module both through its inputs and through every parameter.
GradCheckResult check_module(ParamStore<D>& store, const GradFn<D>& f,
                             const std::vector<DT>& inputs, Rng& rng,
                             const GradCheckOptions& opt, std::size_t coords) {
  GradCheckResult acc = grad_check<D>(f, inputs, seeded(opt, rng.next_u64(), coords));
  std::vector<DV> fixed;
  for (const DT& t : inputs) fixed.push_back(DV::constant(t));
  merge(acc, grad_check_params<D>([&] { return f(fixed); }, store,
                                  seeded(opt, rng.next_u64(), coords)));
  return acc;
}

// Parameters start at non-trivial values so biases and norm shifts are not
// all zero.
void jitter(ParamStore<D>& store, Rng& rng) {
  for (auto& p : store) {
    for (auto& v : p.value().storage()) v += rng.uniform(-0.2, 0.2);
  }
}

GradCheckResult check_feature_fusion(Rng& rng, const GradCheckOptions& opt) {
  ParamStore<D> store;
  Rng init = rng.fork();
  const int pc = rng.uniform_int(1, 3), rc = rng.uniform_int(1, 2);
  const int h = rng.uniform_int(3, 5), w = rng.uniform_int(3, 5);
  FeatureFusion<D> ff(ModuleBuilder<D>(store, init), pc, rc);
  jitter(store, rng);
  return check_module(
      store, [&](const std::vector<DV>& in) { return ff(in[0], in[1]); },
      {rng.uniform_tensor<D>({pc, h, w}, -1, 1), rng.uniform_tensor<D>({rc, h, w}, -1, 1)}, rng,
      opt, 12);
}

GradCheckResult check_range_guided(Rng& rng, const GradCheckOptions& opt) {
  ParamStore<D> store;
  Rng init = rng.fork();
  const int c = rng.uniform_int(1, 3), o = rng.uniform_int(1, 3), rc = rng.uniform_int(1, 2);
  const int h = rng.uniform_int(4, 6), w = rng.uniform_int(4, 6);
  const double d_max = rng.uniform(1.5, 4.0);
  RangeGuidedConv<D> rg(ModuleBuilder<D>(store, init), c, o, rc, d_max);
  jitter(store, rng);
  return check_module(
      store, [&](const std::vector<DV>& in) { return rg(in[0], in[1]); },
      {rng.uniform_tensor<D>({c, h, w}, -1, 1), rng.uniform_tensor<D>({rc, h, w}, -1, 1)}, rng,
      opt, 16);
}

GradCheckResult check_rdpc(Rng& rng, const GradCheckOptions& opt) {
  ParamStore<D> store;
  Rng init = rng.fork();
  const int h = rng.uniform_int(2, 4), w = rng.uniform_int(3, 5);
  Rdpc<D> m(ModuleBuilder<D>(store, init), 3, 2, 3, 2, 6.0);
  jitter(store, rng);
  return check_module(
      store, [&](const std::vector<DV>& in) { return m(in[0], in[1]); },
      {rng.uniform_tensor<D>({3, h, w}, -1, 1), rng.uniform_tensor<D>({2, h, w}, -1, 1)}, rng,
      opt, 3);
}

GradCheckResult check_rlsfe(Rng& rng, const GradCheckOptions& opt) {
  ParamStore<D> store;
  Rng init = rng.fork();
  const int h = rng.uniform_int(3, 5), w = rng.uniform_int(3, 6);
  Rlsfe<D> m(ModuleBuilder<D>(store, init), 3, 2, 3, 2, 3.0);
  jitter(store, rng);
  return check_module(
      store, [&](const std::vector<DV>& in) { return m(in[0], in[1]); },
      {rng.uniform_tensor<D>({3, h, w}, -1, 1), rng.uniform_tensor<D>({2, h, w}, -1, 1)}, rng,
      opt, 4);
}

GradCheckResult check_semantic_head(Rng& rng, const GradCheckOptions& opt) {
  ParamStore<D> store;
  Rng init = rng.fork();
  HeadConfig cfg;
  cfg.num_classes = 3;
  cfg.fpn_width = 3;
  cfg.ren_width = 2;
  cfg.branch_width = 3;
  cfg.narrow_width = 2;
  cfg.rdpc_d_max = 4.0;
  cfg.rlsfe_d_max = 2.0;
  SemanticHead<D> head(ModuleBuilder<D>(store, init), cfg);
  jitter(store, rng);
  // x4 level of a 64x128 input; the other levels halve it. The coarsest
  // level keeps 2x4 pixels so channel normalisation is not degenerate.
  std::vector<DT> inputs;
  for (int l = 0; l < kLevels; ++l) {
    inputs.push_back(rng.uniform_tensor<D>({cfg.fpn_width, 16 >> l, 32 >> l}, -1, 1));
  }
  for (int l = 0; l < kLevels; ++l) {
    inputs.push_back(rng.uniform_tensor<D>({cfg.ren_width, 16 >> l, 32 >> l}, -1, 1));
  }
  return check_module(
      store,
      [&](const std::vector<DV>& in) {
        Levels<D> rp{in[0], in[1], in[2], in[3]};
        Levels<D> r{in[4], in[5], in[6], in[7]};
        return head(rp, r);
      },
      inputs, rng, opt, 2);
}

GradCheckResult check_fuse_logits(Rng& rng, const GradCheckOptions& opt) {
  const int h = rng.uniform_int(2, 6), w = rng.uniform_int(2, 6);
  return grad_check<D>(
      [](const std::vector<DV>& in) { return fuse_logits(in[0], in[1]); },
      {rng.uniform_tensor<D>({1, h, w}, -4, 4), rng.uniform_tensor<D>({1, h, w}, -4, 4)},
      seeded(opt, rng.next_u64(), 0));
}

GradCheckResult check_lovasz(Rng& rng, const GradCheckOptions& opt) {
  const int c = rng.uniform_int(2, 4), h = rng.uniform_int(2, 5), w = rng.uniform_int(2, 5);
  std::vector<std::uint32_t> target(static_cast<std::size_t>(h) * w);
  for (auto& t : target) {
    t = rng.uniform() < 0.1 ? static_cast<std::uint32_t>(c)
                            : static_cast<std::uint32_t>(rng.uniform_int(0, c - 1));
  }
  target[0] = 0;
  return grad_check<D>(
      [target, c](const std::vector<DV>& in) {
        return lovasz_softmax(ops::softmax_channels(in[0]), target, static_cast<std::uint32_t>(c));
      },
      {rng.uniform_tensor<D>({c, h, w}, -2, 2)}, seeded(opt, rng.next_u64(), 0));
}

using CheckFn = GradCheckResult (*)(Rng&, const GradCheckOptions&);

const std::vector<std::pair<std::string, CheckFn>>& registry() {
  static const std::vector<std::pair<std::string, CheckFn>> r = {
      {"conv2d", check_conv2d},
      {"separable_conv", check_separable},
      {"bilinear_sample", check_bilinear},
      {"proximity_conv", check_proximity},
      {"feature_fusion", check_feature_fusion},
      {"range_guided_conv", check_range_guided},
      {"rdpc", check_rdpc},
      {"rlsfe", check_rlsfe},
      {"semantic_head", check_semantic_head},
      {"fuse_logits", check_fuse_logits},
      {"lovasz_softmax", check_lovasz},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& gradient_suite_ops() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : registry()) n.push_back(name);
    return n;
  }();
  return names;
}

std::vector<OpGradReport> run_gradient_suite(int seeds, std::uint64_t base_seed,
                                             const std::vector<std::string>& only,
                                             const GradCheckOptions& opt) {
  if (seeds < 1) {
    throw Error(ErrorKind::kValidation, "seed count must be >= 1",
                {{"seeds", std::to_string(seeds)}});
  }
  for (const auto& name : only) {
    const auto& names = gradient_suite_ops();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      throw Error(ErrorKind::kValidation, "unknown operator " + name, {{"op", name}});
    }
  }
  std::vector<OpGradReport> out;
  std::uint64_t op_index = 0;
  for (const auto& [name, fn] : registry()) {
    ++op_index;
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    OpGradReport rep;
    rep.op = name;
    rep.seeds = seeds;
    const auto t0 = std::chrono::steady_clock::now();
    for (int s = 0; s < seeds; ++s) {
      Rng rng(base_seed * 1000003ull + op_index * 7919ull + static_cast<std::uint64_t>(s));
      const GradCheckResult r = fn(rng, opt);
      rep.max_rel_error = std::max(rep.max_rel_error, r.max_rel_error);
      rep.checked += r.checked;
      rep.skipped += r.skipped;
    }
    rep.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(rep);
  }
  return out;
}

}  // namespace lps
