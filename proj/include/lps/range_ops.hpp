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

// Range-aware operators: proximity convolution, gated feature fusion and
// range-guided depthwise atrous separable convolution.

#ifndef LPS_RANGE_OPS_HPP_
#define LPS_RANGE_OPS_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lps/layers.hpp"

namespace lps {

// Per-pixel neighbour offsets ordered by range difference to the pixel.
struct ProximityGrid {
  int height = 0;
  int width = 0;
  int k = 0;
  std::vector<std::int8_t> offsets;  // (H, W, k, 2) as (drow, dcol)

  int drow(std::size_t pixel, int i) const {
    return offsets[(pixel * static_cast<std::size_t>(k) + i) * 2];
  }
  int dcol(std::size_t pixel, int i) const {
    return offsets[(pixel * static_cast<std::size_t>(k) + i) * 2 + 1];
  }
  friend bool operator==(const ProximityGrid&, const ProximityGrid&) = default;
};

// range is (H, W) or (1, H, W). valid may be empty (every pixel valid).
//
// Candidates are the valid in-image pixels of the search window. The k
// entries kept are the nearest by |range difference|, then by Chebyshev
// distance, then by row-major window position; they are listed by
// |range difference| with row-major position breaking ties. Missing entries
// and every entry of an invalid pixel are the query offset (0, 0).
ProximityGrid build_proximity_grid(const Tensor& range, const std::vector<std::uint8_t>& valid,
                                   int search_h = 5, int search_w = 5, int k = 9);

// y(p) = b + sum_i w_i x(p + offset_i), where w is (out, in, kh, kw) with
// kh * kw == grid.k and w_i runs over the kernel in row-major order.
template <typename T>
Var<T> proximity_conv(const Var<T>& x, const ProximityGrid& grid, const Var<T>& w,
                      const Var<T>& b);

// g * a + (1 - g) * b, elementwise.
template <typename T>
Var<T> gated_blend(const Var<T>& g, const Var<T>& a, const Var<T>& b);

// Sampling coordinates (2, H, W): (row + d * oy, col + d * ox) with d (1, H, W).
template <typename T>
Var<T> scaled_offset_coords(const Var<T>& d, int oy, int ox);

// out[c] = sum_k w[c, 0, k] * taps[k][c] for a (C, 1, kh, kw) weight whose
// kh * kw equals taps.size().
template <typename T>
Var<T> depthwise_taps(const std::vector<Var<T>>& taps, const Var<T>& w);

template <typename T>
struct FusionOutput {
  Var<T> out;
  Var<T> g;
  Var<T> gate;
};

// Gated fusion of pyramid features P with range features R.
template <typename T>
class FeatureFusion {
 public:
  FeatureFusion() = default;
  FeatureFusion(ModuleBuilder<T> mb, int p_channels, int r_channels)
      : block1_(mb.sub("cbl1"), p_channels + r_channels, p_channels, 3),
        block2_(mb.sub("cbl2"), p_channels, p_channels, 3),
        gate_(mb.sub("gate"), p_channels, p_channels, 1, 1) {}

  FusionOutput<T> forward(const Var<T>& p, const Var<T>& r) const {
    if (p.value().rank() != 3 || r.value().rank() != 3 || p.value().dim(1) != r.value().dim(1) ||
        p.value().dim(2) != r.value().dim(2)) {
      throw Error(ErrorKind::kShape,
                  "feature_fusion: P " + shape_str(p.shape()) + " and R " + shape_str(r.shape()) +
                      " differ in spatial extent",
                  {{"P", shape_str(p.shape())}, {"R", shape_str(r.shape())}});
    }
    FusionOutput<T> o;
    o.g = block2_(block1_(ops::concat_channels<T>({p, r})));
    o.gate = ops::sigmoid(gate_(o.g));
    o.out = gated_blend(o.gate, o.g, p);
    return o;
  }
  Var<T> operator()(const Var<T>& p, const Var<T>& r) const { return forward(p, r).out; }

  Conv<T>& gate_conv() { return gate_; }

 private:
  ConvBlock<T> block1_;
  ConvBlock<T> block2_;
  Conv<T> gate_;
};

// Depthwise separable 3x3 convolution whose per-pixel dilation
// d = d_max * sigmoid(conv3x3(ren)) scales the canonical 3x3 offsets.
template <typename T>
class RangeGuidedConv {
 public:
  RangeGuidedConv() = default;
  RangeGuidedConv(ModuleBuilder<T> mb, int in, int out, int ren_channels, double d_max)
      : guide_(mb.sub("guide"), ren_channels, 1, 3, 3), sep_(mb.sub("sep"), in, out),
        d_max_(d_max) {}

  double d_max() const { return d_max_; }

  Var<T> dilation(const Var<T>& ren) const {
    return ops::scale(ops::sigmoid(guide_(ren)), static_cast<T>(d_max_));
  }

  Var<T> operator()(const Var<T>& x, const Var<T>& ren) const {
    Var<T> unused;
    return forward(x, ren, &unused);
  }

  Var<T> forward(const Var<T>& x, const Var<T>& ren, Var<T>* d_out) const {
    if (x.value().rank() != 3 || ren.value().rank() != 3 ||
        x.value().dim(1) != ren.value().dim(1) || x.value().dim(2) != ren.value().dim(2)) {
      throw Error(ErrorKind::kShape,
                  "range_guided_conv: input " + shape_str(x.shape()) + " and range features " +
                      shape_str(ren.shape()) + " differ in spatial extent",
                  {{"input", shape_str(x.shape())}, {"range", shape_str(ren.shape())}});
    }
    Var<T> d = dilation(ren);
    *d_out = d;
    std::vector<Var<T>> taps;
    for (int oy = -1; oy <= 1; ++oy) {
      for (int ox = -1; ox <= 1; ++ox) {
        taps.push_back(ops::bilinear_sample(x, scaled_offset_coords(d, oy, ox),
                                            ops::SamplePadding::kZeros));
      }
    }
    return ops::conv2d(depthwise_taps(taps, sep_.dw->var()), sep_.pw->var(), sep_.pb->var());
  }

  // Pins d to a constant by zeroing the guidance weights.
  void force_dilation(double d) {
    guide_.w->value().fill(T(0));
    double bias;
    if (d <= 0.0) {
      bias = -1e4;
    } else if (d >= d_max_) {
      bias = 1e4;
    } else {
      bias = std::log(d / (d_max_ - d));
    }
    guide_.b->value().fill(static_cast<T>(bias));
  }

  const SepConv<T>& sep() const { return sep_; }

 private:
  Conv<T> guide_;
  SepConv<T> sep_;
  double d_max_ = 1.0;
};

}  // namespace lps

#endif  // LPS_RANGE_OPS_HPP_
