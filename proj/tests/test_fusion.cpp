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
#include <set>

#include "lps/fusion.hpp"
#include "lps/grad_check.hpp"
#include "lps/ops.hpp"
#include "support.hpp"

namespace lps {
namespace {

// Semantic logits (5, h, w) with class `fill` winning everywhere.
Tensor field(int h, int w, std::uint32_t fill) {
  Tensor t({5, h, w}, 0.0f);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) t.at(static_cast<int>(fill), r, c) = 4.0f;
  }
  return t;
}

InstancePrediction car(float score, BBox box, float logit = 3.0f) {
  InstancePrediction p;
  p.class_id = 3;
  p.score = score;
  p.bbox = box;
  p.mask_logits = Tensor({1, box.height(), box.width()}, logit);
  return p;
}

TEST(FuseLogits, PointValue) {
  const Tensor one({1, 1, 1}, 1.0f);
  const double expect = 2.0 * 2.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(fuse_logits(one, one)[0], expect, 1e-6);
  EXPECT_NEAR(expect, 2.9242, 1e-3);
}

TEST(FuseLogits, SymmetricAndZeroAtCancellation) {
  Rng rng(50);
  const Tensor a = rng.uniform_tensor<float>({1, 3, 3}, -4, 4);
  const Tensor b = rng.uniform_tensor<float>({1, 3, 3}, -4, 4);
  EXPECT_EQ(fuse_logits(a, b), fuse_logits(b, a));
  Tensor neg = a;
  for (auto& v : neg.storage()) v = -v;
  const Tensor zero = fuse_logits(a, neg);
  for (float v : zero.storage()) EXPECT_NEAR(v, 0.0f, 1e-6);
}

TEST(PrepareInstances, ConfidenceThreshold) {
  FusionConfig cfg;
  const auto kept = prepare_instance_logits({car(0.4f, {0, 0, 4, 4}), car(0.5f, {4, 4, 8, 8}),
                                             car(0.9f, {8, 8, 12, 12})},
                                            16, 16, cfg);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].source, 2u);  // highest score first
  EXPECT_EQ(kept[1].source, 1u);
}

TEST(PrepareInstances, OverlapThreshold) {
  FusionConfig cfg;
  // The second box overlaps 8 of its 16 pixels with the first: exactly o_t.
  auto kept = prepare_instance_logits({car(0.9f, {0, 0, 4, 4}), car(0.8f, {0, 2, 4, 6})}, 8, 8,
                                      cfg);
  EXPECT_EQ(kept.size(), 2u);
  kept = prepare_instance_logits({car(0.9f, {0, 0, 4, 4}), car(0.8f, {0, 1, 4, 5})}, 8, 8, cfg);
  EXPECT_EQ(kept.size(), 1u);
}

TEST(PrepareInstances, MaskShapes) {
  FusionConfig cfg;
  InstancePrediction full = car(0.9f, {2, 2, 4, 5});
  full.mask_logits = Tensor({1, 8, 8}, -1.0f);
  full.mask_logits.at(0, 3, 3) = 5.0f;  // inside the box
  full.mask_logits.at(0, 0, 0) = 5.0f;  // outside: cropped away
  auto kept = prepare_instance_logits({full}, 8, 8, cfg);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_FLOAT_EQ(kept[0].logits.at(0, 3, 3), 5.0f);
  EXPECT_FLOAT_EQ(kept[0].logits.at(0, 2, 2), -1.0f);
  EXPECT_FLOAT_EQ(kept[0].logits.at(0, 0, 0), 0.0f);  // cropped away
  full.mask_logits.fill(-1.0f);
  EXPECT_TRUE(prepare_instance_logits({full}, 8, 8, cfg).empty());  // empty after binarising
  // Any other mask size is resampled to the box.
  InstancePrediction small = car(0.9f, {0, 0, 6, 6});
  small.mask_logits = Tensor({1, 3, 3}, 1.5f);
  kept = prepare_instance_logits({small}, 8, 8, cfg);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_FLOAT_EQ(kept[0].logits.at(0, 5, 5), 1.5f);
}

TEST(PrepareInstances, InvalidBoxes) {
  FusionConfig cfg;
  for (BBox b : {BBox{0, 0, 0, 3}, BBox{-1, 0, 2, 2}, BBox{0, 0, 9, 2}}) {
    InstancePrediction p = car(0.9f, {0, 0, 1, 1});
    p.bbox = b;
    try {
      prepare_instance_logits({p}, 8, 8, cfg);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kValidation);
    }
  }
}

TEST(PanopticFusion, LowScoreInstanceNeverAppears) {
  const ClassMap map = testing::toy_class_map();
  Rng rng(51);
  for (int t = 0; t < 20; ++t) {
    Tensor logits = rng.uniform_tensor<float>({5, 16, 16}, -2, 2);
    const BBox box{2, 2, 10, 10};
    for (int r = 2; r < 10; ++r) {
      for (int c = 2; c < 10; ++c) logits.at(3, r, c) = 10.0f;
    }
    FusionConfig cfg;
    cfg.min_stuff_area = 0;
    const auto res = panoptic_fusion(logits, {car(0.4f, box, 8.0f)}, cfg, map);
    for (std::size_t i = 0; i < res.panoptic.size(); ++i) {
      EXPECT_NE(res.panoptic.semantic[i], 3u);
      EXPECT_EQ(res.panoptic.instance[i], 0u);
    }
    const auto seen = panoptic_fusion(logits, {car(0.6f, box, 8.0f)}, cfg, map);
    EXPECT_EQ(seen.panoptic.semantic[5 * 16 + 5], 3u);
    EXPECT_EQ(seen.panoptic.instance[5 * 16 + 5], 1u);
  }
}

TEST(PanopticFusion, SmallStuffRegionBecomesIgnore) {
  const ClassMap map = testing::toy_class_map();
  Tensor logits = field(32, 32, 0);
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 10; ++c) logits.at(1, r, c) = 9.0f;  // 100 building pixels
  }
  FusionConfig cfg;  // min_sa 128
  const auto res = panoptic_fusion(logits, {}, cfg, map);
  EXPECT_EQ(res.panoptic.semantic[0], map.ignore_id());
  EXPECT_EQ(res.panoptic.semantic[31 * 32 + 31], 0u);
  cfg.min_stuff_area = 100;
  EXPECT_EQ(panoptic_fusion(logits, {}, cfg, map).panoptic.semantic[0], 1u);
}

TEST(PanopticFusion, ContiguousIdsAndThingCheck) {
  const ClassMap map = testing::toy_class_map();
  const Tensor logits = field(8, 16, 0);
  FusionConfig cfg;
  cfg.min_stuff_area = 0;
  // The middle instance loses every pixel to road and gets no id.
  const auto res = panoptic_fusion(
      logits, {car(0.9f, {0, 0, 4, 4}, 9.0f), car(0.8f, {0, 8, 4, 10}, 1.0f),
               car(0.7f, {4, 12, 8, 16}, 4.0f)},
      cfg, map);
  std::set<std::uint32_t> ids(res.panoptic.instance.begin(), res.panoptic.instance.end());
  EXPECT_EQ(ids, (std::set<std::uint32_t>{0, 1, 2}));
  EXPECT_EQ(res.panoptic.instance[0], 1u);
  EXPECT_EQ(res.panoptic.instance[5 * 16 + 13], 2u);
  EXPECT_EQ(res.panoptic.semantic[5 * 16 + 13], 3u);
  InstancePrediction road = car(0.9f, {0, 0, 2, 2});
  road.class_id = 0;
  EXPECT_THROW(panoptic_fusion(logits, {road}, cfg, map), Error);
}

TEST(Periphery, SingleBoundaryPixel) {
  PanopticLabel2D pan(1, 2);
  pan.semantic = {3, 0};
  pan.instance = {1, 0};
  const Tensor range({1, 1, 2}, std::vector<float>{10.0f, 8.0f});
  EXPECT_DOUBLE_EQ(periphery_loss(pan, range), -4.0);
}

TEST(Periphery, NoBackgroundNeighbourIsExcluded) {
  // Two instances side by side, then background: only the right instance's
  // pixel touches background.
  PanopticLabel2D pan(1, 3);
  pan.semantic = {3, 4, 0};
  pan.instance = {1, 2, 0};
  const Tensor range({1, 1, 3}, std::vector<float>{5.0f, 10.0f, 7.0f});
  const auto terms = periphery_terms(pan, range);
  ASSERT_EQ(terms.pixels.size(), 1u);
  EXPECT_EQ(terms.pixels[0], 1u);
  EXPECT_DOUBLE_EQ(periphery_loss(pan, range), -9.0);
  PanopticLabel2D stuff_only(1, 3);
  EXPECT_DOUBLE_EQ(periphery_loss(stuff_only, range), 0.0);
}

TEST(Periphery, GradientFollowsWinningProbability) {
  // Hard value, soft gradient: compare against finite differences of the
  // surrogate -(1/|B|) sum p_best * gap.
  Rng rng(52);
  PanopticLabel2D pan(2, 3);
  pan.semantic = {3, 3, 0, 0, 0, 0};
  pan.instance = {1, 1, 0, 0, 0, 0};
  const Tensor range = rng.uniform_tensor<float>({1, 2, 3}, 2, 12);
  const BasicTensor<double> logits = rng.uniform_tensor<double>({3, 2, 3}, -1, 1);
  const auto terms = periphery_terms(pan, range);
  const auto surrogate = [&](const BasicTensor<double>& x) {
    const BasicTensor<double> p = kernels::softmax_channels_forward(x);
    double s = 0;
    for (std::size_t k = 0; k < terms.pixels.size(); ++k) {
      const std::size_t px = terms.pixels[k];
      int best = 0;
      for (int c = 1; c < 3; ++c) {
        if (x[c * 6 + px] > x[best * 6 + px]) best = c;
      }
      s += p[best * 6 + px] * terms.gaps[k];
    }
    return -s / static_cast<double>(terms.pixels.size());
  };
  auto v = Var<double>::leaf(logits);
  const auto loss = periphery_loss(v, pan, range);
  EXPECT_NEAR(loss.value()[0], periphery_loss(pan, range), 1e-9);
  backward(loss);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    BasicTensor<double> hi = logits, lo = logits;
    hi[i] += 1e-6;
    lo[i] -= 1e-6;
    EXPECT_NEAR(v.grad()[i], (surrogate(hi) - surrogate(lo)) / 2e-6, 1e-5) << i;
  }
}

TEST(FusionConfig, Validation) {
  FusionConfig c;
  c.confidence_threshold = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.min_stuff_area = -1;
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace lps
