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

// Toy-scale semantic pipeline: proximity input layer, strided encoder, range
// encoder, two-way FPN with range-aware fusion, and the distance-dependent
// semantic head built from RDPC and RLSFE blocks.

#ifndef LPS_HEADS_HPP_
#define LPS_HEADS_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lps/range_ops.hpp"

namespace lps {

inline constexpr int kLevels = 4;  // x4, x8, x16, x32

struct HeadConfig {
  int in_channels = 5;
  int num_classes = 5;
  int pcm_width = 16;
  std::array<int, kLevels> encoder_widths = {16, 24, 32, 48};
  int ren_width = 8;
  int fpn_width = 32;
  int branch_width = 16;  // wide head branches
  int narrow_width = 8;   // range-guided and RLSFE output branches
  int search = 5;
  int proximity_k = 9;
  double rdpc_d_max = 24.0;
  double rlsfe_d_max = 3.0;
};

template <typename T>
using Levels = std::array<Var<T>, kLevels>;

// Throws kShape unless the last two extents of a rank-2 or rank-3 shape are
// positive multiples of 32.
void require_divisible_by_32(const Shape& shape, const char* what);

// Proximity convolution, normalisation, leaky ReLU.
template <typename T>
class ProximityModule {
 public:
  ProximityModule() = default;
  ProximityModule(ModuleBuilder<T> mb, int in, int out, int kernel = 3) {
    w_ = &mb.xavier("conv.w", {out, in, kernel, kernel});
    b_ = &mb.constant("conv.b", {out}, T(0));
    norm_ = Norm<T>(mb.sub("norm"), out);
  }
  Var<T> operator()(const Var<T>& x, const ProximityGrid& grid) const {
    return ops::leaky_relu(norm_(proximity_conv(x, grid, w_->var(), b_->var())));
  }

 private:
  Param<T>* w_ = nullptr;
  Param<T>* b_ = nullptr;
  Norm<T> norm_;
};

// Stride-2 stem followed by four stride-2 stages; returns the x4..x32 maps.
template <typename T>
class StridedEncoder {
 public:
  StridedEncoder() = default;
  StridedEncoder(ModuleBuilder<T> mb, int in, int stem, const std::array<int, kLevels>& widths) {
    ops::Conv2dOptions s2;
    s2.stride = 2;
    stem_ = ConvBlock<T>(mb.sub("stem"), in, stem, 3, s2);
    int prev = stem;
    for (int i = 0; i < kLevels; ++i) {
      stages_[static_cast<std::size_t>(i)] =
          ConvBlock<T>(mb.sub("stage" + std::to_string(i + 1)), prev, widths[i], 3, s2);
      prev = widths[static_cast<std::size_t>(i)];
    }
  }

  Levels<T> operator()(const Var<T>& x) const {
    require_divisible_by_32(x.shape(), "encoder input");
    Levels<T> out;
    Var<T> h = stem_(x);
    for (std::size_t i = 0; i < kLevels; ++i) {
      h = stages_[i](h);
      out[i] = h;
    }
    return out;
  }

 private:
  ConvBlock<T> stem_;
  std::array<ConvBlock<T>, kLevels> stages_;
};

// Top-down and bottom-up aggregation computed independently, summed per level
// and passed through a 3x3 conv block.
template <typename T>
class TwoWayFpn {
 public:
  TwoWayFpn() = default;
  TwoWayFpn(ModuleBuilder<T> mb, const std::array<int, kLevels>& in_widths, int width) {
    for (std::size_t i = 0; i < kLevels; ++i) {
      const std::string s = std::to_string(4 << i);
      top_down_[i] = Conv<T>(mb.sub("td_lateral" + s), in_widths[i], width, 1, 1);
      bottom_up_[i] = Conv<T>(mb.sub("bu_lateral" + s), in_widths[i], width, 1, 1);
      out_[i] = ConvBlock<T>(mb.sub("out" + s), width, width, 3);
    }
  }

  Levels<T> operator()(const std::vector<Var<T>>& features) const {
    if (features.size() != kLevels) {
      throw Error(ErrorKind::kShape,
                  "two_way_fpn expects 4 levels, got " + std::to_string(features.size()),
                  {{"levels", std::to_string(features.size())}});
    }
    Levels<T> td, bu, out;
    td[kLevels - 1] = top_down_[kLevels - 1](features[kLevels - 1]);
    for (int i = kLevels - 2; i >= 0; --i) {
      const auto u = static_cast<std::size_t>(i);
      td[u] = ops::add(top_down_[u](features[u]), ops::upsample_bilinear(td[u + 1], 2));
    }
    bu[0] = bottom_up_[0](features[0]);
    for (std::size_t i = 1; i < kLevels; ++i) {
      bu[i] = ops::add(bottom_up_[i](features[i]), ops::avg_pool2(bu[i - 1]));
    }
    for (std::size_t i = 0; i < kLevels; ++i) out[i] = out_[i](ops::add(td[i], bu[i]));
    return out;
  }
  Levels<T> operator()(const Levels<T>& f) const {
    return (*this)(std::vector<Var<T>>(f.begin(), f.end()));
  }

  std::array<Conv<T>, kLevels>& top_down() { return top_down_; }
  std::array<Conv<T>, kLevels>& bottom_up() { return bottom_up_; }

 private:
  std::array<Conv<T>, kLevels> top_down_;
  std::array<Conv<T>, kLevels> bottom_up_;
  std::array<ConvBlock<T>, kLevels> out_;
};

// One exclusive fusion module per pyramid level.
template <typename T>
class RangeAwareFpn {
 public:
  RangeAwareFpn() = default;
  RangeAwareFpn(ModuleBuilder<T> mb, int p_width, int r_width) {
    for (std::size_t i = 0; i < kLevels; ++i) {
      fusion_[i] = FeatureFusion<T>(mb.sub("fusion" + std::to_string(4 << i)), p_width, r_width);
    }
  }

  Levels<T> operator()(const std::vector<Var<T>>& p, const std::vector<Var<T>>& r) const {
    if (p.size() != kLevels || r.size() != kLevels) {
      throw Error(ErrorKind::kShape,
                  "range_aware_fpn expects 4 levels on both inputs, got " +
                      std::to_string(p.size()) + " and " + std::to_string(r.size()),
                  {{"P", std::to_string(p.size())}, {"R", std::to_string(r.size())}});
    }
    Levels<T> out;
    for (std::size_t i = 0; i < kLevels; ++i) out[i] = fusion_[i](p[i], r[i]);
    return out;
  }
  Levels<T> operator()(const Levels<T>& p, const Levels<T>& r) const {
    return (*this)(std::vector<Var<T>>(p.begin(), p.end()),
                   std::vector<Var<T>>(r.begin(), r.end()));
  }

  FeatureFusion<T>& fusion(std::size_t level) { return fusion_[level]; }

 private:
  std::array<FeatureFusion<T>, kLevels> fusion_;
};

// Range-guided conv followed by normalisation and leaky ReLU.
template <typename T>
class RangeGuidedBlock {
 public:
  RangeGuidedBlock() = default;
  RangeGuidedBlock(ModuleBuilder<T> mb, int in, int out, int ren, double d_max)
      : conv_(mb.sub("rg"), in, out, ren, d_max), norm_(mb.sub("norm"), out) {}
  Var<T> operator()(const Var<T>& x, const Var<T>& r) const {
    return ops::leaky_relu(norm_(conv_(x, r)));
  }
  Var<T> dilation(const Var<T>& r) const { return conv_.dilation(r); }
  RangeGuidedConv<T>& conv() { return conv_; }

 private:
  RangeGuidedConv<T> conv_;
  Norm<T> norm_;
};

template <typename T>
void require_same_extent(const Var<T>& a, const Var<T>& b, const char* what) {
  if (a.value().rank() != 3 || b.value().rank() != 3 || a.value().dim(1) != b.value().dim(1) ||
      a.value().dim(2) != b.value().dim(2)) {
    throw Error(ErrorKind::kShape,
                std::string(what) + ": " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                    " differ in spatial extent",
                {{"lhs", shape_str(a.shape())}, {"rhs", shape_str(b.shape())}});
  }
}

// Dense prediction cell with range-guided branches.
template <typename T>
class Rdpc {
 public:
  Rdpc() = default;
  Rdpc(ModuleBuilder<T> mb, int in, int ren, int wide, int narrow, double d_max)
      : a_(mb.sub("a"), in, wide, 1, 6),
        b_(mb.sub("b"), in, narrow, ren, d_max),
        a11_(mb.sub("a_1x1"), wide, wide, 1, 1),
        a621_(mb.sub("a_6x21"), wide, wide, 6, 21),
        a1815_(mb.sub("a_18x15"), wide, wide, 18, 15),
        a63_(mb.sub("a_18x15_6x3"), wide, wide, 6, 3),
        fifth_(mb.sub("fifth"), wide, narrow, ren, d_max),
        project_(mb.sub("project"), 4 * wide + wide + 2 * narrow, wide, 1, 1) {}

  // Channels entering the final 1x1 projection.
  int concat_width() const { return project_.w->value().dim(1); }

  Var<T> operator()(const Var<T>& rp, const Var<T>& r) const {
    require_same_extent(rp, r, "rdpc");
    Var<T> a = a_(rp);
    Var<T> b = b_(rp, r);
    Var<T> a3 = a1815_(a);
    Var<T> concat = ops::concat_channels<T>(
        {a11_(a), a621_(a), a3, a63_(a3), a, ops::concat_channels<T>({b, fifth_(a, r)})});
    return project_(concat);
  }

  Conv<T>& projection() { return project_; }

 private:
  SepBlock<T> a_;
  RangeGuidedBlock<T> b_;
  SepBlock<T> a11_, a621_, a1815_, a63_;
  RangeGuidedBlock<T> fifth_;
  Conv<T> project_;
};

// Large-scale feature extractor: range-guided conv then two separable convs.
template <typename T>
class Rlsfe {
 public:
  Rlsfe() = default;
  Rlsfe(ModuleBuilder<T> mb, int in, int ren, int wide, int narrow, double d_max)
      : rg_(mb.sub("rg"), in, wide, ren, d_max),
        sep1_(mb.sub("sep1"), wide, narrow),
        sep2_(mb.sub("sep2"), narrow, narrow) {}

  Var<T> operator()(const Var<T>& rp, const Var<T>& r) const {
    require_same_extent(rp, r, "rlsfe");
    return sep2_(sep1_(rg_(rp, r)));
  }
  // Intermediate widths, for shape checks.
  std::array<int, 3> widths() const {
    return {sep1_.conv.dw->value().dim(0), sep2_.conv.dw->value().dim(0),
            sep2_.conv.pw->value().dim(0)};
  }
  Var<T> dilation(const Var<T>& r) const { return rg_.dilation(r); }

 private:
  RangeGuidedBlock<T> rg_;
  SepBlock<T> sep1_, sep2_;
};

// Two separable conv blocks and a x2 bilinear upsample.
template <typename T>
class McModule {
 public:
  McModule() = default;
  McModule(ModuleBuilder<T> mb, int in, int out)
      : sep1_(mb.sub("sep1"), in, out), sep2_(mb.sub("sep2"), out, out) {}
  Var<T> operator()(const Var<T>& x) const {
    return ops::upsample_bilinear(sep2_(sep1_(x)), 2);
  }

 private:
  SepBlock<T> sep1_, sep2_;
};

template <typename T>
class SemanticHead {
 public:
  SemanticHead() = default;
  SemanticHead(ModuleBuilder<T> mb, const HeadConfig& cfg) {
    const int c = cfg.fpn_width, r = cfg.ren_width, w = cfg.branch_width, n = cfg.narrow_width;
    rdpc32_ = Rdpc<T>(mb.sub("rdpc32"), c, r, w, n, cfg.rdpc_d_max);
    rdpc16_ = Rdpc<T>(mb.sub("rdpc16"), c, r, w, n, cfg.rdpc_d_max);
    rlsfe8_ = Rlsfe<T>(mb.sub("rlsfe8"), c, r, w, n, cfg.rlsfe_d_max);
    rlsfe4_ = Rlsfe<T>(mb.sub("rlsfe4"), c, r, w, n, cfg.rlsfe_d_max);
    mc32_ = McModule<T>(mb.sub("mc32"), w, w);
    mc16_ = McModule<T>(mb.sub("mc16"), w, n);
    mc8_ = McModule<T>(mb.sub("mc8"), n, n);
    classifier_ = Conv<T>(mb.sub("classifier"), 2 * w + 2 * n, cfg.num_classes, 1, 1);
  }

  // rp and r hold the x4, x8, x16, x32 levels in that order.
  Var<T> operator()(const Levels<T>& rp, const Levels<T>& r) const {
    Var<T> t32 = rdpc32_(rp[3], r[3]);
    Var<T> t16 = ops::add(rdpc16_(rp[2], r[2]), mc32_(t32));
    Var<T> t8 = ops::add(rlsfe8_(rp[1], r[1]), mc16_(t16));
    Var<T> t4 = ops::add(rlsfe4_(rp[0], r[0]), mc8_(t8));
    Var<T> b8 = ops::add(t8, ops::avg_pool2(t4));
    Var<T> merged = ops::concat_channels<T>({ops::upsample_bilinear(t32, 8),
                                             ops::upsample_bilinear(t16, 4),
                                             ops::upsample_bilinear(b8, 2), t4});
    return ops::upsample_bilinear(classifier_(merged), 4);
  }

 private:
  Rdpc<T> rdpc32_, rdpc16_;
  Rlsfe<T> rlsfe8_, rlsfe4_;
  McModule<T> mc32_, mc16_, mc8_;
  Conv<T> classifier_;
};

// The complete toy semantic network with its own parameter store.
template <typename T>
class SemanticNet {
 public:
  SemanticNet(const HeadConfig& cfg, std::uint64_t seed) : cfg_(cfg), rng_(seed) {
    ModuleBuilder<T> mb(store_, rng_);
    pcm_ = ProximityModule<T>(mb.sub("pcm"), cfg.in_channels, cfg.pcm_width);
    encoder_ = StridedEncoder<T>(mb.sub("encoder"), cfg.pcm_width, cfg.pcm_width,
                                 cfg.encoder_widths);
    std::array<int, kLevels> ren_widths;
    ren_widths.fill(cfg.ren_width);
    ren_ = StridedEncoder<T>(mb.sub("ren"), 1, cfg.ren_width, ren_widths);
    fpn_ = TwoWayFpn<T>(mb.sub("fpn"), cfg.encoder_widths, cfg.fpn_width);
    rfpn_ = RangeAwareFpn<T>(mb.sub("rfpn"), cfg.fpn_width, cfg.ren_width);
    head_ = SemanticHead<T>(mb.sub("head"), cfg);
  }
  SemanticNet(const SemanticNet&) = delete;
  SemanticNet& operator=(const SemanticNet&) = delete;

  // input is (in_channels, H, W) with the range in channel 0.
  Var<T> forward(const Var<T>& input, const ProximityGrid& grid) const {
    require_divisible_by_32(input.shape(), "network input");
    Levels<T> enc = encoder_(pcm_(input, grid));
    Levels<T> ren = ren_(ops::select_channel(input, 0));
    return head_(rfpn_(fpn_(enc), ren), ren);
  }

  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }
  const HeadConfig& config() const { return cfg_; }

 private:
  HeadConfig cfg_;
  Rng rng_;
  ParamStore<T> store_;
  ProximityModule<T> pcm_;
  StridedEncoder<T> encoder_;
  StridedEncoder<T> ren_;
  TwoWayFpn<T> fpn_;
  RangeAwareFpn<T> rfpn_;
  SemanticHead<T> head_;
};

// Proximity grid for a network input: range channel 0, valid where range > 0.
ProximityGrid input_grid(const Tensor& input, int search, int k);

template <typename T>
struct SemanticLoss {
  Var<T> total;
  Var<T> pixel;   // mean negative log-likelihood
  Var<T> lovasz;  // Lovasz-Softmax over present classes
};

// Mean -log softmax(logits)[target] over pixels whose target is not ignore_id.
template <typename T>
Var<T> pixel_nll(const Var<T>& logits, const std::vector<std::uint32_t>& target,
                 std::uint32_t ignore_id);

// Multiclass Lovasz-Softmax on probabilities (C, H, W).
template <typename T>
Var<T> lovasz_softmax(const Var<T>& probs, const std::vector<std::uint32_t>& target,
                      std::uint32_t ignore_id);

// Gradient of the Lovasz extension of the Jaccard loss w.r.t. sorted errors.
std::vector<double> lovasz_grad(const std::vector<std::uint8_t>& fg_sorted);

template <typename T>
SemanticLoss<T> semantic_loss(const Var<T>& logits, const std::vector<std::uint32_t>& target,
                              std::uint32_t ignore_id);

// Fraction of non-ignored pixels whose argmax matches the target.
double pixel_accuracy(const Tensor& logits, const std::vector<std::uint32_t>& target,
                      std::uint32_t ignore_id);

}  // namespace lps

#endif  // LPS_HEADS_HPP_
