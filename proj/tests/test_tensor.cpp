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

#include <gtest/gtest.h>

#include <cmath>

#include "lps/grad_check.hpp"
#include "lps/grad_suite.hpp"
#include "lps/kernels.hpp"
#include "lps/kink.hpp"
#include "lps/ops.hpp"
#include "lps/rng.hpp"

namespace lps {
namespace {

using kernels::Conv2dOptions;
using kernels::Padding;

// Direct definition of a zero-padded cross-correlation.
Tensor naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, const Conv2dOptions& o) {
  const int ci = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const int co = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int ph = o.padding == Padding::kSame ? o.dilation_h * (kh - 1) / 2 : 0;
  const int pw = o.padding == Padding::kSame ? o.dilation_w * (kw - 1) / 2 : 0;
  const int oh = (h + 2 * ph - o.dilation_h * (kh - 1) - 1) / o.stride + 1;
  const int ow = (wd + 2 * pw - o.dilation_w * (kw - 1) - 1) / o.stride + 1;
  Tensor y({co, oh, ow});
  for (int a = 0; a < co; ++a) {
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double s = b.empty() ? 0.0 : b[static_cast<std::size_t>(a)];
        for (int c = 0; c < ci; ++c) {
          for (int u = 0; u < kh; ++u) {
            for (int v = 0; v < kw; ++v) {
              const int r = i * o.stride + u * o.dilation_h - ph;
              const int q = j * o.stride + v * o.dilation_w - pw;
              if (r < 0 || r >= h || q < 0 || q >= wd) continue;
              s += static_cast<double>(w[((static_cast<std::size_t>(a) * ci + c) * kh + u) * kw + v]) *
                   x.at(c, r, q);
            }
          }
        }
        y.at(a, i, j) = static_cast<float>(s);
      }
    }
  }
  return y;
}

void expect_near(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], tol) << "at " << i;
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor({1, 2, 3, 4, 5}), Error);
  EXPECT_THROW(Tensor({2, -1}), Error);
  try {
    Tensor({2, 2}, std::vector<float>(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
}

TEST(Conv2d, MatchesDirectDefinition) {
  Rng rng(1);
  for (int trial = 0; trial < 40; ++trial) {
    Conv2dOptions o;
    o.stride = rng.uniform_int(1, 2);
    o.dilation_h = rng.uniform_int(1, 3);
    o.dilation_w = rng.uniform_int(1, 3);
    o.padding = rng.uniform() < 0.5 ? Padding::kSame : Padding::kValid;
    const int k = rng.uniform() < 0.5 ? 1 : 3;
    const Tensor x = rng.uniform_tensor<float>({rng.uniform_int(1, 3), rng.uniform_int(7, 12),
                                                rng.uniform_int(7, 12)}, -1, 1);
    const Tensor w = rng.uniform_tensor<float>({rng.uniform_int(1, 3), x.dim(0), k, k}, -1, 1);
    const Tensor b = trial % 3 == 0 ? Tensor() : rng.uniform_tensor<float>({w.dim(0)}, -1, 1);
    expect_near(kernels::conv2d_forward(x, w, b, o), naive_conv(x, w, b, o), 1e-5);
  }
}

TEST(Conv2d, ChannelMismatchIsShapeError) {
  try {
    kernels::conv2d_forward(Tensor({2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
    EXPECT_NE(std::string(e.what()).find("(1, 3, 3, 3)"), std::string::npos) << e.what();
  }
}

TEST(Depthwise, EqualsBlockDiagonalConv) {
  Rng rng(2);
  const Tensor x = rng.uniform_tensor<float>({3, 9, 11}, -1, 1);
  const Tensor dw = rng.uniform_tensor<float>({3, 1, 3, 3}, -1, 1);
  Tensor full({3, 3, 3, 3});
  for (int c = 0; c < 3; ++c) {
    for (int k = 0; k < 9; ++k) full[(static_cast<std::size_t>(c) * 3 + c) * 9 + k] = dw[c * 9 + k];
  }
  Conv2dOptions o;
  o.dilation_h = 2;
  expect_near(kernels::depthwise_forward(x, dw, o), kernels::conv2d_forward(x, full, Tensor(), o),
              1e-6);
}

TEST(BilinearSample, IntegerCoordinatesGather) {
  Rng rng(3);
  const Tensor x = rng.uniform_tensor<float>({2, 5, 6}, -1, 1);
  Tensor coords({2, 5, 6});
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 6; ++c) {
      coords.at(0, r, c) = static_cast<float>(4 - r);
      coords.at(1, r, c) = static_cast<float>(c);
    }
  }
  const Tensor y = kernels::bilinear_sample_forward(x, coords, kernels::SamplePadding::kZeros);
  for (int ch = 0; ch < 2; ++ch) {
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 6; ++c) EXPECT_FLOAT_EQ(y.at(ch, r, c), x.at(ch, 4 - r, c));
    }
  }
}

TEST(BilinearSample, PaddingModes) {
  const Tensor x({1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  const Tensor coords({2, 1, 1}, std::vector<float>{-1.0f, 0.5f});
  EXPECT_FLOAT_EQ(kernels::bilinear_sample_forward(x, coords, kernels::SamplePadding::kZeros)[0],
                  0.0f);
  EXPECT_FLOAT_EQ(kernels::bilinear_sample_forward(x, coords, kernels::SamplePadding::kClamp)[0],
                  1.5f);
  const Tensor half({2, 1, 1}, std::vector<float>{-0.5f, 0.0f});
  EXPECT_FLOAT_EQ(kernels::bilinear_sample_forward(x, half, kernels::SamplePadding::kZeros)[0],
                  0.5f);
}

TEST(Resize, IdentityAndConstant) {
  Rng rng(4);
  const Tensor x = rng.uniform_tensor<float>({2, 4, 8}, -1, 1);
  expect_near(kernels::resize_bilinear_forward(x, 4, 8), x, 0.0);
  const Tensor c({1, 3, 5}, 2.5f);
  const Tensor up = kernels::resize_bilinear_forward(c, 12, 7);
  for (float v : up.storage()) EXPECT_FLOAT_EQ(v, 2.5f);
}

TEST(AvgPool, MeansOfBlocks) {
  const Tensor x({1, 2, 4}, std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor y = kernels::avg_pool2_forward(x);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2}));
  EXPECT_FLOAT_EQ(y[0], 3.5f);
  EXPECT_FLOAT_EQ(y[1], 5.5f);
  EXPECT_THROW(kernels::avg_pool2_forward(Tensor({1, 3, 4})), Error);
}

TEST(Softmax, NormalisedAndStable) {
  Tensor x({3, 1, 2}, std::vector<float>{1000, 0, 1001, 1, 999, 2});
  const Tensor y = kernels::softmax_channels_forward(x);
  for (int j = 0; j < 2; ++j) {
    double s = 0;
    for (int c = 0; c < 3; ++c) {
      EXPECT_TRUE(std::isfinite(y.at(c, 0, j)));
      s += y.at(c, 0, j);
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(ChannelNorm, ZeroMeanUnitVariance) {
  Rng rng(5);
  const Tensor x = rng.uniform_tensor<float>({2, 6, 7}, -3, 5);
  kernels::NormCache<float> cache;
  const Tensor y = kernels::channel_norm_forward(x, Tensor({2}, 1.0f), Tensor({2}, 0.0f), 1e-5f,
                                                 &cache);
  for (int c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    for (int i = 0; i < 42; ++i) m += y[c * 42 + i];
    m /= 42;
    for (int i = 0; i < 42; ++i) v += (y[c * 42 + i] - m) * (y[c * 42 + i] - m);
    EXPECT_NEAR(m, 0.0, 1e-5);
    EXPECT_NEAR(v / 42, 1.0, 1e-3);
  }
}

TEST(Autodiff, SharedLeafAccumulates) {
  auto x = Var<double>::leaf(BasicTensor<double>({1, 1, 2}, std::vector<double>{2, 3}));
  // sum(x * x + x) has gradient 2x + 1.
  backward(ops::sum(ops::add(ops::hadamard(x, x), x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 5.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], 7.0);
}

TEST(Autodiff, NonScalarRootNeedsSeed) {
  auto x = Var<double>::leaf(BasicTensor<double>({1, 1, 2}));
  EXPECT_THROW(backward(ops::scale(x, 2.0)), Error);
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
  auto x = Var<double>::leaf(BasicTensor<double>({1, 1, 1}, 3.0));
  auto c = Var<double>::constant(BasicTensor<double>({1, 1, 1}, 4.0));
  backward(ops::sum(ops::hadamard(x, c)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
  EXPECT_TRUE(c.grad().empty());
}

TEST(GradCheck, FlagsAWrongBackward) {
  const GradFn<double> wrong = [](const std::vector<Var<double>>& in) {
    BasicTensor<double> v = in[0].value();
    for (auto& e : v.storage()) e = e * e;
    return make_result<double>(std::move(v), {in[0]},
                               [](const BasicTensor<double>& g, auto& parents) {
                                 parents[0]->accumulate(g);  // should be 2x * g
                               });
  };
  Rng rng(6);
  const auto r = grad_check(wrong, {rng.uniform_tensor<double>({1, 3, 3}, 1, 2)});
  EXPECT_GT(r.max_rel_error, 0.1);
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_NEAR(relative_error(2.0, 1.0), 0.5, 1e-12);
  EXPECT_NEAR(relative_error(1e-9, 0.0), 1e-3, 1e-12);
}

TEST(Kink, LeakyReluSignatureTracksBranch) {
  const auto sig = [](double v) {
    kink::Scope scope;
    ops::leaky_relu(Var<double>::constant(BasicTensor<double>({1, 1, 1}, v)));
    return scope.signature();
  };
  EXPECT_EQ(sig(0.5), sig(0.7));
  EXPECT_NE(sig(0.5), sig(-0.5));
  EXPECT_FALSE(kink::recording());
}

// Small, quick slice of the full suite; the acceptance runner covers all
// operators over twenty seeds.
TEST(GradSuite, CoreOperatorsPass) {
  const auto reports = run_gradient_suite(
      3, 11, {"conv2d", "separable_conv", "bilinear_sample", "proximity_conv", "fuse_logits",
              "lovasz_softmax"});
  ASSERT_EQ(reports.size(), 6u);
  for (const auto& r : reports) {
    EXPECT_LT(r.max_rel_error, 1e-3) << r.op;
    EXPECT_GT(r.checked, 0u) << r.op;
  }
}

TEST(GradSuite, UnknownOperatorRejected) {
  try {
    run_gradient_suite(1, 0, {"nope"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kValidation);
  }
}

}  // namespace
}  // namespace lps
