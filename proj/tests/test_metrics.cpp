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

#include "json.hpp"
#include "lps/metrics.hpp"
#include "support.hpp"

namespace lps {
namespace {

using testing::LabelPair;

LabelSet labels(std::vector<std::uint32_t> sem, std::vector<std::uint32_t> inst) {
  LabelSet l;
  l.semantic = std::move(sem);
  l.instance = std::move(inst);
  return l;
}

void expect_same_report(const EvalReport& a, const EvalReport& b) {
  EXPECT_EQ(a.pq, b.pq);
  EXPECT_EQ(a.pq_dagger, b.pq_dagger);
  EXPECT_EQ(a.sq, b.sq);
  EXPECT_EQ(a.rq, b.rq);
  EXPECT_EQ(a.tp, b.tp);
  EXPECT_EQ(a.fp, b.fp);
  EXPECT_EQ(a.fn, b.fn);
  EXPECT_EQ(a.thing.pq, b.thing.pq);
  EXPECT_EQ(a.stuff.pq, b.stuff.pq);
  ASSERT_EQ(a.per_class.size(), b.per_class.size());
  for (const auto& [cls, s] : a.per_class) {
    const auto& o = b.per_class.at(cls);
    EXPECT_EQ(s.pq, o.pq) << cls;
    EXPECT_EQ(s.tp, o.tp) << cls;
    EXPECT_EQ(s.fp, o.fp) << cls;
    EXPECT_EQ(s.fn, o.fn) << cls;
  }
}

// Ground truth: car instance 1 on [0, 100), car without instance on
// [100, 120). Prediction: ignore on [0, 20), car instance 7 on [20, 120).
LabelPair hand_case() {
  LabelPair p;
  p.gt.resize(120);
  p.pred.resize(120);
  for (std::size_t i = 0; i < 120; ++i) {
    p.gt.semantic[i] = 3;
    p.gt.instance[i] = i < 100 ? 1 : 0;
    p.pred.semantic[i] = i < 20 ? 5 : 3;
    p.pred.instance[i] = i < 20 ? 0 : 7;
  }
  return p;
}


TEST(PanopticQuality, HandCase) {
  const ClassMap map = testing::toy_class_map();
  const LabelPair p = hand_case();
  const SegmentMatch m = match_segments(p.pred, p.gt, map);
  ASSERT_EQ(m.classes.at(3).tp.size(), 1u);
  EXPECT_NEAR(m.classes.at(3).tp[0].iou, 80.0 / 120.0, 1e-12);
  const EvalReport r = panoptic_scores(m, map);
  EXPECT_NEAR(r.pq, 0.6667, 1e-4);
  EXPECT_DOUBLE_EQ(r.rq, 1.0);
  EXPECT_EQ(r.per_class.size(), 1u);
}

TEST(PanopticQuality, HalfIouIsNotAMatch) {
  const ClassMap map = testing::toy_class_map();
  // Prediction covers 2 of 4 ground-truth points plus 0 others: IoU 0.5.
  const auto gt = labels({3, 3, 3, 3}, {1, 1, 1, 1});
  const auto pred = labels({3, 3, 5, 5}, {2, 2, 0, 0});
  const EvalReport r = panoptic_scores(match_segments(pred, gt, map), map);
  EXPECT_EQ(r.tp, 0u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_EQ(r.pq, 0.0);
}

TEST(PanopticQuality, IdenticalInputsScoreOne) {
  const ClassMap map = testing::toy_class_map();
  Rng rng(60);
  for (int t = 0; t < 50; ++t) {
    const LabelPair p = testing::random_label_pair(rng, map, 100);
    const EvalReport r = panoptic_scores(match_segments(p.gt, p.gt, map), map);
    if (r.per_class.empty()) continue;
    EXPECT_DOUBLE_EQ(r.pq, 1.0);
    EXPECT_DOUBLE_EQ(r.sq, 1.0);
    EXPECT_DOUBLE_EQ(r.miou, 1.0);
    EXPECT_EQ(r.fp + r.fn, 0u);
  }
}

TEST(PanopticQuality, AgreesWithOracle) {
  const ClassMap map = testing::toy_class_map();
  Rng rng(61);
  for (int t = 0; t < 100; ++t) {
    const LabelPair p = testing::random_label_pair(rng, map, rng.uniform_int(1, 120));
    expect_same_report(panoptic_scores(match_segments(p.pred, p.gt, map), map),
                       pq_oracle(p.pred, p.gt, map));
  }
}

TEST(PanopticQuality, DaggerUsesIouForStuff) {
  const ClassMap map = testing::toy_class_map();
  // Road: 3 of 4 ground-truth points predicted road, one predicted building.
  const auto gt = labels({0, 0, 0, 0, 1, 1, 1, 1}, {0, 0, 0, 0, 0, 0, 0, 0});
  const auto pred = labels({0, 0, 0, 1, 1, 1, 1, 1}, {0, 0, 0, 0, 0, 0, 0, 0});
  const EvalReport r = panoptic_scores(match_segments(pred, gt, map), map);
  const double road_iou = 3.0 / 4.0, building_iou = 4.0 / 5.0;
  EXPECT_DOUBLE_EQ(r.per_class.at(0).pq, road_iou);
  EXPECT_DOUBLE_EQ(r.pq_dagger, (road_iou + building_iou) / 2.0);
  EXPECT_DOUBLE_EQ(r.miou, (road_iou + building_iou) / 2.0);
}

TEST(PanopticQuality, IgnoredGroundTruthCreatesNoFalsePositive) {
  const ClassMap map = testing::toy_class_map();
  const auto gt = labels({5, 5, 5, 0, 0}, {0, 0, 0, 0, 0});
  const auto pred = labels({3, 3, 3, 0, 0}, {4, 4, 4, 0, 0});
  const EvalReport r = panoptic_scores(match_segments(pred, gt, map), map);
  EXPECT_EQ(r.fp, 0u);
  EXPECT_DOUBLE_EQ(r.pq, 1.0);
}

TEST(PanopticQuality, InputValidation) {
  const ClassMap map = testing::toy_class_map();
  try {
    match_segments(labels({0, 0}, {0, 0}), labels({0}, {0}), map);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShape);
  }
  try {
    match_segments(labels({9}, {0}), labels({0}, {0}), map);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kRange);
  }
}

TEST(PanopticQuality, MergeAddsCounts) {
  const ClassMap map = testing::toy_class_map();
  Rng rng(62);
  const LabelPair a = testing::random_label_pair(rng, map, 80);
  const LabelPair b = testing::random_label_pair(rng, map, 80);
  const EvalReport ra = panoptic_scores(match_segments(a.pred, a.gt, map), map);
  const EvalReport rb = panoptic_scores(match_segments(b.pred, b.gt, map), map);
  SegmentMatch m = match_segments(a.pred, a.gt, map);
  m.merge(match_segments(b.pred, b.gt, map));
  const EvalReport r = panoptic_scores(m, map);
  EXPECT_EQ(r.tp, ra.tp + rb.tp);
  EXPECT_EQ(r.fp, ra.fp + rb.fp);
  EXPECT_EQ(r.fn, ra.fn + rb.fn);
}

TEST(BorderBand, MatchesBruteForce) {
  Rng rng(63);
  for (int t = 0; t < 30; ++t) {
    const int h = rng.uniform_int(1, 12), w = rng.uniform_int(1, 12);
    PanopticLabel2D gt(h, w);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      // Blocky labels so bands are neither empty nor everything.
      const int r = static_cast<int>(i) / w, c = static_cast<int>(i) % w;
      gt.semantic[i] = static_cast<std::uint32_t>((r / 3 + c / 4) % 3);
      gt.instance[i] = rng.uniform() < 0.05 ? 1 : 0;
    }
    const int width = rng.uniform_int(0, 3);
    EXPECT_EQ(border_band(gt, width), testing::brute_force_band(gt, width)) << t;
  }
}

TEST(BorderIou, PerfectAndDegraded) {
  const ClassMap map = testing::toy_class_map();
  PanopticLabel2D gt(6, 6);
  for (std::size_t i = 0; i < gt.size(); ++i) gt.semantic[i] = (i % 6) < 3 ? 0 : 1;
  for (const auto& [cls, v] : border_iou(gt, gt, 1, map)) EXPECT_DOUBLE_EQ(v, 1.0) << cls;
  PanopticLabel2D pred = gt;
  for (int r = 0; r < 6; ++r) pred.semantic[r * 6 + 2] = 1;  // boundary shifted left
  const auto b = border_iou(pred, gt, 1, map);
  EXPECT_LT(b.at(0), 1.0);
  EXPECT_LT(b.at(1), 1.0);
  // Far from the boundary the error would not register.
  EXPECT_EQ(border_iou(gt, gt, 1, map, {0}).size(), 1u);
}

TEST(Miou, HandValue) {
  const ClassMap map = testing::toy_class_map();
  const std::vector<std::uint32_t> gt = {0, 0, 1, 1, 5};
  const std::vector<std::uint32_t> pred = {0, 1, 1, 1, 2};
  const IouResult r = miou(pred, gt, map);
  EXPECT_DOUBLE_EQ(r.per_class.at(0), 0.5);
  EXPECT_DOUBLE_EQ(r.per_class.at(1), 2.0 / 3.0);
  EXPECT_EQ(r.per_class.count(2), 0u);
  EXPECT_DOUBLE_EQ(r.mean, (0.5 + 2.0 / 3.0) / 2.0);
}

TEST(Report, JsonAndTable) {
  const ClassMap map = testing::toy_class_map();
  const LabelPair p = hand_case();
  const EvalReport r = panoptic_scores(match_segments(p.pred, p.gt, map), map);
  const auto j = nlohmann::json::parse(report_json(r, map));
  EXPECT_EQ(j["format"], "lpskit-eval");
  EXPECT_EQ(j["version"], 1);
  EXPECT_NEAR(j["pq"].get<double>(), 0.6667, 1e-4);
  const std::string table = report_table(r, map);
  EXPECT_NE(table.find("PQ_dag"), std::string::npos);
  EXPECT_NE(table.find("car"), std::string::npos);
  const auto stuff = nlohmann::json::parse(report_json(r, map, Split::kStuff));
  EXPECT_EQ(stuff["classes"].size(), 0u);
}

}  // namespace
}  // namespace lps
