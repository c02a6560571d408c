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

// Parameterised building blocks shared by the range operators and the heads.
// Weights use Xavier-uniform initialisation, biases and norm shifts start at
// zero and norm scales at one.

#ifndef LPS_LAYERS_HPP_
#define LPS_LAYERS_HPP_

#include <string>
#include <utility>

#include "lps/autodiff.hpp"
#include "lps/ops.hpp"
#include "lps/rng.hpp"

namespace lps {

template <typename T>
class ModuleBuilder {
 public:
  ModuleBuilder(ParamStore<T>& store, Rng& rng, std::string prefix = "")
      : store_(&store), rng_(&rng), prefix_(std::move(prefix)) {}

  ModuleBuilder sub(const std::string& name) const {
    return ModuleBuilder(*store_, *rng_, prefix_ + name + ".");
  }

  Param<T>& xavier(const std::string& name, const Shape& shape) {
    return store_->create(prefix_ + name, xavier_uniform<T>(*rng_, shape));
  }
  Param<T>& constant(const std::string& name, const Shape& shape, T value) {
    return store_->create(prefix_ + name, BasicTensor<T>(shape, value));
  }

 private:
  ParamStore<T>* store_;
  Rng* rng_;
  std::string prefix_;
};

template <typename T>
struct Conv {
  Param<T>* w = nullptr;
  Param<T>* b = nullptr;  // null for bias-free convolutions
  ops::Conv2dOptions opt;

  Conv() = default;
  Conv(ModuleBuilder<T> mb, int in, int out, int kh, int kw, ops::Conv2dOptions o = {},
       bool bias = true)
      : opt(o) {
    w = &mb.xavier("w", {out, in, kh, kw});
    if (bias) b = &mb.constant("b", {out}, T(0));
  }

  int out_channels() const { return w->value().dim(0); }
  Var<T> operator()(const Var<T>& x) const {
    return ops::conv2d(x, w->var(), b != nullptr ? b->var() : Var<T>(), opt);
  }
};

template <typename T>
struct Norm {
  Param<T>* gamma = nullptr;
  Param<T>* beta = nullptr;

  Norm() = default;
  Norm(ModuleBuilder<T> mb, int channels) {
    gamma = &mb.constant("gamma", {channels}, T(1));
    beta = &mb.constant("beta", {channels}, T(0));
  }
  Var<T> operator()(const Var<T>& x) const {
    return ops::channel_norm(x, gamma->var(), beta->var());
  }
};

// Convolution, normalisation, leaky ReLU.
template <typename T>
struct ConvBlock {
  Conv<T> conv;
  Norm<T> norm;

  ConvBlock() = default;
  ConvBlock(ModuleBuilder<T> mb, int in, int out, int k, ops::Conv2dOptions o = {})
      : conv(mb.sub("conv"), in, out, k, k, o, true), norm(mb.sub("norm"), out) {}
  Var<T> operator()(const Var<T>& x) const { return ops::leaky_relu(norm(conv(x))); }
};

// 3x3 depthwise (optionally dilated) followed by a biased 1x1 pointwise.
template <typename T>
struct SepConv {
  Param<T>* dw = nullptr;
  Param<T>* pw = nullptr;
  Param<T>* pb = nullptr;
  int dilation_h = 1;
  int dilation_w = 1;

  SepConv() = default;
  SepConv(ModuleBuilder<T> mb, int in, int out, int dil_h = 1, int dil_w = 1)
      : dilation_h(dil_h), dilation_w(dil_w) {
    dw = &mb.xavier("dw", {in, 1, 3, 3});
    pw = &mb.xavier("pw", {out, in, 1, 1});
    pb = &mb.constant("pb", {out}, T(0));
  }
  Var<T> operator()(const Var<T>& x) const {
    return ops::separable_conv(x, dw->var(), pw->var(), pb->var(), dilation_h, dilation_w);
  }
};

template <typename T>
struct SepBlock {
  SepConv<T> conv;
  Norm<T> norm;

  SepBlock() = default;
  SepBlock(ModuleBuilder<T> mb, int in, int out, int dil_h = 1, int dil_w = 1)
      : conv(mb.sub("sep"), in, out, dil_h, dil_w), norm(mb.sub("norm"), out) {}
  Var<T> operator()(const Var<T>& x) const { return ops::leaky_relu(norm(conv(x))); }
};

}  // namespace lps

#endif  // LPS_LAYERS_HPP_
