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

#include <map>

#include "json.hpp"
#include "lps/pseudo_label.hpp"
#include "lps/serialize.hpp"
#include "support.hpp"

namespace lps {
namespace {

namespace fs = std::filesystem;

// Reference selection by enumeration, written independently of the search.
std::size_t best_by_enumeration(const std::vector<ControlEval>& evals, double cutoff,
                                bool* feasible) {
  std::size_t best = 0;
  *feasible = false;
  for (std::size_t i = 0; i < evals.size(); ++i) {
    const ControlEval& e = evals[i];
    if (e.tp == 0 || e.pq < cutoff) continue;
    if (!*feasible) {
      best = i;
      *feasible = true;
      continue;
    }
    const ControlEval& b = evals[best];
    // Compare (tp - fp) / tp exactly through cross-multiplication.
    const long double lhs = (static_cast<long double>(e.tp) - e.fp) * b.tp;
    const long double rhs = (static_cast<long double>(b.tp) - b.fp) * e.tp;
    if (lhs > rhs || (lhs == rhs && e.pq > b.pq)) best = i;
  }
  return best;
}

TEST(ControlGrid, CartesianOrder) {
  const ControlGrid g = parse_control_grid(
      R"({"grid": {"confidence_threshold": [0.4, 0.6], "overlap_threshold": [0.3, 0.5, 0.7]},
          "base": {"min_stuff_area": 50}})",
      "g.json");
  ASSERT_EQ(g.size(), 6u);
  // overlap_threshold precedes confidence_threshold in field order, so the
  // confidence varies fastest.
  EXPECT_DOUBLE_EQ(g.at(0).overlap_threshold, 0.3);
  EXPECT_DOUBLE_EQ(g.at(0).confidence_threshold, 0.4);
  EXPECT_DOUBLE_EQ(g.at(1).overlap_threshold, 0.3);
  EXPECT_DOUBLE_EQ(g.at(1).confidence_threshold, 0.6);
  EXPECT_DOUBLE_EQ(g.at(5).overlap_threshold, 0.7);
  EXPECT_EQ(g.at(5).min_stuff_area, 50);
  EXPECT_THROW(g.at(6), Error);
}

TEST(ControlGrid, ErrorsCarryKeyPath) {
  const auto key_of = [](const std::string& text) {
    try {
      parse_control_grid(text, "g.json");
    } catch (const Error& e) {
      return e.details().count("key") ? e.details().at("key") : std::string("<") + to_string(e.kind()) + ">";
    }
    return std::string("no error");
  };
  EXPECT_EQ(key_of(R"({"grid": {"bogus": [1]}})"), "grid.bogus");
  EXPECT_EQ(key_of(R"({"grid": {"nms_iou": [0.5, 1.5]}})"), "grid.nms_iou[1]");
  EXPECT_EQ(key_of(R"({"grid": {"proposal_count": [2.5]}})"), "grid.proposal_count[0]");
  EXPECT_EQ(key_of(R"({"grid": {}})"), "grid");
  EXPECT_EQ(key_of(R"({"base": {"nms_iou": "x"}, "grid": {"nms_iou": [0.5]}})"), "base.nms_iou");
  EXPECT_EQ(key_of("{"), "<format>");
}

TEST(ControlParams, CanonicalJsonAndFingerprint) {
  ControlParams a;
  const ControlParams back = parse_control_params(a.to_json(), "p");
  EXPECT_EQ(back, a);
  EXPECT_EQ(params_fingerprint(a), params_fingerprint(back));
  EXPECT_EQ(params_fingerprint(a).size(), 16u);
  ControlParams b = a;
  b.nms_iou = 0.6;
  EXPECT_NE(params_fingerprint(a), params_fingerprint(b));
}

TEST(GridSearch, MatchesEnumeration) {
  Rng rng(70);
  int feasible_cases = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<ControlParams> points(static_cast<std::size_t>(rng.uniform_int(1, 30)));
    std::vector<ControlEval> evals(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      points[i].proposal_count = static_cast<int>(i);  // identifies the point
      evals[i].tp = static_cast<std::uint64_t>(rng.uniform_int(0, 6));
      evals[i].fp = static_cast<std::uint64_t>(rng.uniform_int(0, 6));
      evals[i].pq = rng.uniform_int(0, 4) / 4.0;  // coarse, so ties happen
    }
    const double cutoff = rng.uniform_int(0, 4) / 4.0;
    const ControlEvaluator mock = [&](const ControlParams& p) {
      return evals[static_cast<std::size_t>(p.proposal_count)];
    };
    bool feasible = false;
    const std::size_t expect = best_by_enumeration(evals, cutoff, &feasible);
    const ControlGrid grid(points);
    if (!feasible) {
      try {
        grid_search_control(mock, grid, {cutoff, 0});
        FAIL() << "trial " << t;
      } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kInfeasible);
        EXPECT_TRUE(e.details().count("best_pq"));
      }
      continue;
    }
    ++feasible_cases;
    const GridSearchResult r = grid_search_control(mock, grid, {cutoff, 0}, 1 + t % 3);
    EXPECT_EQ(r.index, expect) << "trial " << t;
    EXPECT_EQ(r.params.proposal_count, static_cast<int>(expect));
    EXPECT_EQ(r.evaluations.size(), points.size());
  }
  EXPECT_GT(feasible_cases, 25);
}

TEST(FilterSmallInstances, EnforcesLimit) {
  Rng rng(71);
  for (int t = 0; t < 20; ++t) {
    LabelSet l;
    for (int i = 0; i < 200; ++i) {
      const auto s = static_cast<std::uint32_t>(rng.uniform_int(0, 4));
      l.semantic.push_back(s);
      l.instance.push_back(s >= 3 ? static_cast<std::uint32_t>(rng.uniform_int(0, 8)) : 0);
    }
    const int limit = rng.uniform_int(1, 15);
    const LabelSet out = filter_small_instances(l, limit, 5);
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> sizes;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out.instance[i] != 0) ++sizes[{out.semantic[i], out.instance[i]}];
      if (out.semantic[i] == 5) {
        EXPECT_EQ(out.instance[i], 0u);
      }
      if (out.semantic[i] != l.semantic[i]) {
        EXPECT_EQ(out.semantic[i], 5u);
      }
    }
    for (const auto& [key, n] : sizes) EXPECT_GE(n, limit);
    EXPECT_EQ(count_instances(out, 5), sizes.size());
    EXPECT_LE(count_instances(out, 5), count_instances(l, 5));
  }
}

TEST(GeneratePseudoLabels, WritesRawLabelsAndManifest) {
  const ClassMap map = testing::toy_class_map();
  const fs::path dir = testing::scratch_dir("pseudo");
  Rng rng(72);
  std::vector<fs::path> scans;
  for (int i = 0; i < 3; ++i) {
    const auto s = testing::make_synthetic_scan({.rows = 8, .width = 64}, rng);
    scans.push_back(dir / ("s" + std::to_string(i) + ".bin"));
    save_scan(scans.back(), s.cloud);
  }
  scans.push_back(dir / "missing.bin");
  // Every point a car; instance 1 for the first 10 points, 2 for the next 2.
  const ScanRunner runner = [](const PointCloud& cloud, const ControlParams&) {
    LabelSet l;
    l.resize(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      l.semantic[i] = 3;
      l.instance[i] = i < 10 ? 1 : i < 12 ? 2 : 0;
    }
    return l;
  };
  const fs::path out = dir / "out";
  const PseudoManifest m =
      generate_pseudo_labels(runner, scans, ControlParams{}, {0.0, 5}, map, out, 2);
  ASSERT_EQ(m.entries.size(), 4u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_TRUE(m.entries[i].error.empty());
    EXPECT_EQ(m.entries[i].instances_before, 2u);
    EXPECT_EQ(m.entries[i].instances_after, 1u);
    const LabelSet l = load_labels(out / ("s" + std::to_string(i) + ".label"));
    EXPECT_EQ(l.semantic[0], 3u);
    EXPECT_EQ(l.instance[0], 1u);
    EXPECT_EQ(l.semantic[10], 255u);  // raw id of the ignore class
    EXPECT_EQ(l.instance[10], 0u);
  }
  EXPECT_FALSE(m.entries[3].error.empty());
  const auto j = nlohmann::json::parse(read_file(out / "manifest.json"));
  EXPECT_EQ(j["format"], "lpskit-pseudo-manifest");
  EXPECT_EQ(j["fingerprint"], params_fingerprint(ControlParams{}));
}

}  // namespace
}  // namespace lps
