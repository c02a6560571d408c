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

#include "lps/ops.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "lps/kink.hpp"

namespace lps::ops {
namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
BasicTensor<T>* grad_slot(const NodePtr<T>& n) {
  if (!n->requires_grad) return nullptr;
  n->ensure_grad();
  return &n->grad;
}

template <typename T>
void require_map(const Var<T>& x, const char* what) {
  if (x.value().rank() != 3) {
    throw Error(ErrorKind::kShape,
                std::string(what) + ": expected a (C, H, W) map, got " + shape_str(x.shape()),
                {{"shape", shape_str(x.shape())}});
  }
}

// Applies y = f(x) elementwise with dy/dx = df(x, y).
template <typename T, typename F, typename DF>
Var<T> unary(const Var<T>& x, F f, DF df) {
  const auto& xv = x.value();
  BasicTensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  BasicTensor<T> yk = y;
  return make_result<T>(std::move(y), {x},
                        [yk = std::move(yk), df](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          BasicTensor<T>* gx = grad_slot(p[0]);
                          if (gx == nullptr) return;
                          const auto& xv = p[0]->value;
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            (*gx)[i] += g[i] * df(xv[i], yk[i]);
                          }
                        });
}

}  // namespace

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, const Conv2dOptions& opt) {
  static const BasicTensor<T> kNoBias;
  const bool has_bias = b.defined();
  BasicTensor<T> y =
      kernels::conv2d_forward(x.value(), w.value(), has_bias ? b.value() : kNoBias, opt);
  std::vector<Var<T>> parents = {x, w};
  if (has_bias) parents.push_back(b);
  return make_result<T>(std::move(y), std::move(parents),
                        [opt](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          kernels::conv2d_backward(p[0]->value, p[1]->value, g, opt,
                                                   grad_slot(p[0]), grad_slot(p[1]),
                                                   p.size() > 2 ? grad_slot(p[2]) : nullptr);
                        });
}

template <typename T>
Var<T> depthwise(const Var<T>& x, const Var<T>& w, const Conv2dOptions& opt) {
  BasicTensor<T> y = kernels::depthwise_forward(x.value(), w.value(), opt);
  return make_result<T>(std::move(y), {x, w},
                        [opt](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          kernels::depthwise_backward(p[0]->value, p[1]->value, g, opt,
                                                      grad_slot(p[0]), grad_slot(p[1]));
                        });
}

template <typename T>
Var<T> separable_conv(const Var<T>& x, const Var<T>& dw, const Var<T>& pw, const Var<T>& pb,
                      int dilation_h, int dilation_w) {
  Conv2dOptions dopt;
  dopt.dilation_h = dilation_h;
  dopt.dilation_w = dilation_w;
  if (pw.value().rank() != 4 || pw.value().dim(2) != 1 || pw.value().dim(3) != 1) {
    throw Error(ErrorKind::kShape,
                "separable_conv: pointwise weight must be (O, C, 1, 1), got " +
                    shape_str(pw.shape()),
                {{"pointwise", shape_str(pw.shape())}});
  }
  return conv2d(depthwise(x, dw, dopt), pw, pb);
}

template <typename T>
Var<T> bilinear_sample(const Var<T>& x, const Var<T>& coords, SamplePadding pad) {
  BasicTensor<T> y = kernels::bilinear_sample_forward(x.value(), coords.value(), pad);
  return make_result<T>(std::move(y), {x, coords},
                        [pad](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          kernels::bilinear_sample_backward(p[0]->value, p[1]->value, pad, g,
                                                            grad_slot(p[0]), grad_slot(p[1]));
                        });
}

template <typename T>
Var<T> resize_bilinear(const Var<T>& x, int out_h, int out_w) {
  BasicTensor<T> y = kernels::resize_bilinear_forward(x.value(), out_h, out_w);
  const int in_h = x.value().dim(1), in_w = x.value().dim(2);
  return make_result<T>(std::move(y), {x},
                        [in_h, in_w](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          if (auto* gx = grad_slot(p[0])) {
                            kernels::resize_bilinear_backward(g, in_h, in_w, gx);
                          }
                        });
}

template <typename T>
Var<T> upsample_bilinear(const Var<T>& x, int factor) {
  require_map(x, "upsample_bilinear");
  if (factor < 1) {
    throw Error(ErrorKind::kValidation, "upsample_bilinear: factor must be >= 1",
                {{"factor", std::to_string(factor)}});
  }
  if (factor == 1) return x;
  return resize_bilinear(x, x.value().dim(1) * factor, x.value().dim(2) * factor);
}

template <typename T>
Var<T> avg_pool2(const Var<T>& x) {
  BasicTensor<T> y = kernels::avg_pool2_forward(x.value());
  return make_result<T>(std::move(y), {x},
                        [](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          if (auto* gx = grad_slot(p[0])) kernels::avg_pool2_backward(g, gx);
                        });
}

template <typename T>
Var<T> softmax_channels(const Var<T>& x) {
  BasicTensor<T> y = kernels::softmax_channels_forward(x.value());
  BasicTensor<T> yk = y;
  return make_result<T>(std::move(y), {x},
                        [yk = std::move(yk)](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          if (auto* gx = grad_slot(p[0])) {
                            kernels::softmax_channels_backward(yk, g, gx);
                          }
                        });
}

template <typename T>
Var<T> channel_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta) {
  auto cache = std::make_shared<kernels::NormCache<T>>();
  BasicTensor<T> y = kernels::channel_norm_forward(x.value(), gamma.value(), beta.value(),
                                                   T(kNormEps), cache.get());
  return make_result<T>(std::move(y), {x, gamma, beta},
                        [cache](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          kernels::channel_norm_backward(*cache, p[1]->value, g, grad_slot(p[0]),
                                                         grad_slot(p[1]), grad_slot(p[2]));
                        });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  if (kink::recording()) {
    // Fold the sign pattern into the kink signature, 64 elements per word.
    const auto& xv = x.value();
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      if (xv[i] > T(0)) word |= std::uint64_t{1} << (i % 64);
      if (i % 64 == 63 || i + 1 == xv.size()) {
        kink::mix(word);
        word = 0;
      }
    }
  }
  return unary<T>(
      x, [slope](T v) { return v > T(0) ? v : slope * v; },
      [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  BasicTensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(y), {a, b},
                        [](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          p[0]->accumulate(g);
                          p[1]->accumulate(g);
                        });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  BasicTensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
  return make_result<T>(std::move(y), {a, b},
                        [](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          p[0]->accumulate(g);
                          if (auto* gb = grad_slot(p[1])) {
                            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
                          }
                        });
}

template <typename T>
Var<T> hadamard(const Var<T>& a, const Var<T>& b) {
  require_same_shape(a.shape(), b.shape(), "hadamard");
  BasicTensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(y), {a, b},
                        [](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          if (auto* ga = grad_slot(p[0])) {
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              (*ga)[i] += g[i] * p[1]->value[i];
                            }
                          }
                          if (auto* gb = grad_slot(p[1])) {
                            for (std::size_t i = 0; i < g.size(); ++i) {
                              (*gb)[i] += g[i] * p[0]->value[i];
                            }
                          }
                        });
}

template <typename T>
Var<T> scale(const Var<T>& x, T s) {
  return unary<T>(
      x, [s](T v) { return s * v; }, [s](T, T) { return s; });
}

template <typename T>
Var<T> add_scalar(const Var<T>& x, T s) {
  return unary<T>(
      x, [s](T v) { return v + s; }, [](T, T) { return T(1); });
}

template <typename T>
Var<T> one_minus(const Var<T>& x) {
  return unary<T>(
      x, [](T v) { return T(1) - v; }, [](T, T) { return T(-1); });
}

template <typename T>
Var<T> broadcast_channels(const Var<T>& x, int c) {
  require_map(x, "broadcast_channels");
  if (x.value().dim(0) != 1) {
    throw Error(ErrorKind::kShape,
                "broadcast_channels: expected one channel, got " + shape_str(x.shape()),
                {{"shape", shape_str(x.shape())}});
  }
  const int h = x.value().dim(1), w = x.value().dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  BasicTensor<T> y({c, h, w});
  for (int k = 0; k < c; ++k) {
    std::copy(x.value().storage().begin(), x.value().storage().end(),
              y.storage().begin() + static_cast<std::ptrdiff_t>(k * plane));
  }
  return make_result<T>(std::move(y), {x},
                        [c, plane](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          if (auto* gx = grad_slot(p[0])) {
                            for (int k = 0; k < c; ++k) {
                              for (std::size_t i = 0; i < plane; ++i) (*gx)[i] += g[k * plane + i];
                            }
                          }
                        });
}

template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& xs) {
  if (xs.empty()) {
    throw Error(ErrorKind::kShape, "concat_channels: no inputs");
  }
  for (const auto& x : xs) require_map(x, "concat_channels");
  const int h = xs[0].value().dim(1), w = xs[0].value().dim(2);
  int total = 0;
  for (const auto& x : xs) {
    if (x.value().dim(1) != h || x.value().dim(2) != w) {
      throw Error(ErrorKind::kShape,
                  "concat_channels: spatial extent " + shape_str(x.shape()) + " does not match " +
                      shape_str(xs[0].shape()),
                  {{"lhs", shape_str(xs[0].shape())}, {"rhs", shape_str(x.shape())}});
    }
    total += x.value().dim(0);
  }
  BasicTensor<T> y({total, h, w});
  std::size_t offset = 0;
  for (const auto& x : xs) {
    std::copy(x.value().storage().begin(), x.value().storage().end(),
              y.storage().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += x.value().size();
  }
  return make_result<T>(std::move(y), xs,
                        [](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          std::size_t off = 0;
                          for (auto& n : p) {
                            const std::size_t len = n->value.size();
                            if (auto* gx = grad_slot(n)) {
                              for (std::size_t i = 0; i < len; ++i) (*gx)[i] += g[off + i];
                            }
                            off += len;
                          }
                        });
}

template <typename T>
Var<T> select_channel(const Var<T>& x, int c) {
  require_map(x, "select_channel");
  if (c < 0 || c >= x.value().dim(0)) {
    throw Error(ErrorKind::kRange,
                "select_channel: channel " + std::to_string(c) + " outside " + shape_str(x.shape()),
                {{"channel", std::to_string(c)}, {"shape", shape_str(x.shape())}});
  }
  const int h = x.value().dim(1), w = x.value().dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  BasicTensor<T> y({1, h, w});
  std::copy_n(x.value().storage().begin() + static_cast<std::ptrdiff_t>(c * plane), plane,
              y.storage().begin());
  return make_result<T>(std::move(y), {x},
                        [c, plane](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          if (auto* gx = grad_slot(p[0])) {
                            for (std::size_t i = 0; i < plane; ++i) (*gx)[c * plane + i] += g[i];
                          }
                        });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = T(0);
  for (T v : x.value().storage()) s += v;
  return make_result<T>(BasicTensor<T>({1}, s), {x},
                        [](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          if (auto* gx = grad_slot(p[0])) {
                            for (auto& v : gx->storage()) v += g[0];
                          }
                        });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw Error(ErrorKind::kShape, "mean of an empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(n));
}

template <typename T>
Var<T> weighted_sum(const Var<T>& x, const BasicTensor<T>& weights) {
  require_same_shape(x.shape(), weights.shape(), "weighted_sum");
  T s = T(0);
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * x.value()[i];
  return make_result<T>(BasicTensor<T>({1}, s), {x},
                        [weights](const BasicTensor<T>& g, std::vector<NodePtr<T>>& p) {
                          if (auto* gx = grad_slot(p[0])) {
                            for (std::size_t i = 0; i < weights.size(); ++i) {
                              (*gx)[i] += g[0] * weights[i];
                            }
                          }
                        });
}

#define LPS_INSTANTIATE_OPS(T)                                                                 \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, const Conv2dOptions&);   \
  template Var<T> depthwise(const Var<T>&, const Var<T>&, const Conv2dOptions&);               \
  template Var<T> separable_conv(const Var<T>&, const Var<T>&, const Var<T>&, const Var<T>&,   \
                                 int, int);                                                    \
  template Var<T> bilinear_sample(const Var<T>&, const Var<T>&, SamplePadding);                \
  template Var<T> resize_bilinear(const Var<T>&, int, int);                                    \
  template Var<T> upsample_bilinear(const Var<T>&, int);                                       \
  template Var<T> avg_pool2(const Var<T>&);                                                    \
  template Var<T> softmax_channels(const Var<T>&);                                             \
  template Var<T> channel_norm(const Var<T>&, const Var<T>&, const Var<T>&);                   \
  template Var<T> sigmoid(const Var<T>&);                                                      \
  template Var<T> leaky_relu(const Var<T>&, T);                                                \
  template Var<T> add(const Var<T>&, const Var<T>&);                                           \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                           \
  template Var<T> hadamard(const Var<T>&, const Var<T>&);                                      \
  template Var<T> scale(const Var<T>&, T);                                                     \
  template Var<T> add_scalar(const Var<T>&, T);                                                \
  template Var<T> one_minus(const Var<T>&);                                                    \
  template Var<T> broadcast_channels(const Var<T>&, int);                                      \
  template Var<T> concat_channels(const std::vector<Var<T>>&);                                 \
  template Var<T> select_channel(const Var<T>&, int);                                          \
  template Var<T> sum(const Var<T>&);                                                          \
  template Var<T> mean(const Var<T>&);                                                         \
  template Var<T> weighted_sum(const Var<T>&, const BasicTensor<T>&);

LPS_INSTANTIATE_OPS(float)
LPS_INSTANTIATE_OPS(double)

#undef LPS_INSTANTIATE_OPS

}  // namespace lps::ops
