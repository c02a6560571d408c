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

// Differentiable operators over Var. Each one records an analytic backward
// built from the kernels in kernels.hpp.

#ifndef LPS_OPS_HPP_
#define LPS_OPS_HPP_

#include <vector>

#include "lps/autodiff.hpp"
#include "lps/kernels.hpp"

namespace lps::ops {

using kernels::Conv2dOptions;
using kernels::Padding;
using kernels::SamplePadding;

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kNormEps = 1e-5;

// b may be an undefined Var for a bias-free convolution.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, const Conv2dOptions& opt = {});

template <typename T>
Var<T> depthwise(const Var<T>& x, const Var<T>& w, const Conv2dOptions& opt = {});

// Depthwise conv (dw: C x 1 x kh x kw) then pointwise conv (pw: O x C x 1 x 1).
template <typename T>
Var<T> separable_conv(const Var<T>& x, const Var<T>& dw, const Var<T>& pw, const Var<T>& pb,
                      int dilation_h = 1, int dilation_w = 1);

template <typename T>
Var<T> bilinear_sample(const Var<T>& x, const Var<T>& coords,
                       SamplePadding pad = SamplePadding::kClamp);

template <typename T>
Var<T> resize_bilinear(const Var<T>& x, int out_h, int out_w);
template <typename T>
Var<T> upsample_bilinear(const Var<T>& x, int factor);
template <typename T>
Var<T> avg_pool2(const Var<T>& x);

template <typename T>
Var<T> softmax_channels(const Var<T>& x);
template <typename T>
Var<T> channel_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta);

template <typename T>
Var<T> sigmoid(const Var<T>& x);
template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope = T(kLeakySlope));

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> hadamard(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& x, T s);
template <typename T>
Var<T> add_scalar(const Var<T>& x, T s);
// 1 - x.
template <typename T>
Var<T> one_minus(const Var<T>& x);

// Repeats a (1, H, W) map across c channels.
template <typename T>
Var<T> broadcast_channels(const Var<T>& x, int c);
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs);
template <typename T>
Var<T> select_channel(const Var<T>& x, int c);

// Scalar reductions, returned with shape (1).
template <typename T>
Var<T> sum(const Var<T>& x);
template <typename T>
Var<T> mean(const Var<T>& x);
template <typename T>
Var<T> weighted_sum(const Var<T>& x, const BasicTensor<T>& weights);

}  // namespace lps::ops

#endif  // LPS_OPS_HPP_
