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

// Raw forward/backward kernels over (C, H, W) feature maps. Backward kernels
// accumulate into the supplied gradient buffers (which must already have the
// right shape) and skip any buffer passed as nullptr.

#ifndef LPS_KERNELS_HPP_
#define LPS_KERNELS_HPP_

#include "lps/tensor.hpp"

namespace lps::kernels {

enum class Padding { kSame, kValid };

struct Conv2dOptions {
  int stride = 1;
  int dilation_h = 1;
  int dilation_w = 1;
  Padding padding = Padding::kSame;
};

// Cross-correlation. w is (out, in, kh, kw); b is (out) or empty. Each output
// element accumulates bias first, then kernel-row, kernel-col, in-channel.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                              const BasicTensor<T>& b, const Conv2dOptions& opt);
template <typename T>
void conv2d_backward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                     const BasicTensor<T>& gy, const Conv2dOptions& opt,
                     BasicTensor<T>* gx, BasicTensor<T>* gw, BasicTensor<T>* gb);

// Per-channel convolution with w shaped (C, 1, kh, kw), stride 1.
template <typename T>
BasicTensor<T> depthwise_forward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                                 const Conv2dOptions& opt);
template <typename T>
void depthwise_backward(const BasicTensor<T>& x, const BasicTensor<T>& w,
                        const BasicTensor<T>& gy, const Conv2dOptions& opt,
                        BasicTensor<T>* gx, BasicTensor<T>* gw);

enum class SamplePadding {
  kClamp,  // coordinates clamp to the border
  kZeros,  // taps outside the image read as zero
};

// coords is (2, Ho, Wo) holding fractional (row, col) per output location.
template <typename T>
BasicTensor<T> bilinear_sample_forward(const BasicTensor<T>& x, const BasicTensor<T>& coords,
                                       SamplePadding pad);
template <typename T>
void bilinear_sample_backward(const BasicTensor<T>& x, const BasicTensor<T>& coords,
                              SamplePadding pad, const BasicTensor<T>& gy,
                              BasicTensor<T>* gx, BasicTensor<T>* gcoords);

// Half-pixel-centre bilinear resize, edge-clamped.
template <typename T>
BasicTensor<T> resize_bilinear_forward(const BasicTensor<T>& x, int out_h, int out_w);
template <typename T>
void resize_bilinear_backward(const BasicTensor<T>& gy, int in_h, int in_w, BasicTensor<T>* gx);

// 2x2 mean pooling with stride 2; extents must be even.
template <typename T>
BasicTensor<T> avg_pool2_forward(const BasicTensor<T>& x);
template <typename T>
void avg_pool2_backward(const BasicTensor<T>& gy, BasicTensor<T>* gx);

// Softmax across channels at every pixel.
template <typename T>
BasicTensor<T> softmax_channels_forward(const BasicTensor<T>& x);
template <typename T>
void softmax_channels_backward(const BasicTensor<T>& y, const BasicTensor<T>& gy,
                               BasicTensor<T>* gx);

// Per-channel normalisation over the spatial extent with learned affine.
template <typename T>
struct NormCache {
  BasicTensor<T> normalized;  // (x - mean) / sqrt(var + eps)
  std::vector<T> inv_std;
};
template <typename T>
BasicTensor<T> channel_norm_forward(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                                    const BasicTensor<T>& beta, T eps, NormCache<T>* cache);
template <typename T>
void channel_norm_backward(const NormCache<T>& cache, const BasicTensor<T>& gamma,
                           const BasicTensor<T>& gy, BasicTensor<T>* gx,
                           BasicTensor<T>* ggamma, BasicTensor<T>* gbeta);

// Output extent of a convolution along one axis.
int conv_out_extent(int in, int kernel, int dilation, int stride, Padding padding);

}  // namespace lps::kernels

#endif  // LPS_KERNELS_HPP_
