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

// Panoptic quality (PQ/SQ/RQ/PQ-dagger), mIoU and border IoU over flat label
// arrays. Inputs hold learning ids; the class map supplies the thing/stuff
// split and the ignore id.

#ifndef LPS_METRICS_HPP_
#define LPS_METRICS_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lps/error.hpp"
#include "lps/io.hpp"

namespace lps {

// Borrowed (semantic, instance) arrays of equal length.
struct PanopticView {
  std::span<const std::uint32_t> semantic;
  std::span<const std::uint32_t> instance;

  PanopticView(std::span<const std::uint32_t> s, std::span<const std::uint32_t> i)
      : semantic(s), instance(i) {}
  PanopticView(const LabelSet& l) : semantic(l.semantic), instance(l.instance) {}  // NOLINT
  PanopticView(const PanopticLabel2D& l) : semantic(l.semantic), instance(l.instance) {}  // NOLINT
  std::size_t size() const { return semantic.size(); }
};

struct TpPair {
  std::uint32_t pred = 0;  // instance id (0 for stuff)
  std::uint32_t gt = 0;
  double iou = 0.0;
};

struct ClassMatch {
  std::vector<TpPair> tp;
  std::vector<std::uint32_t> fp;
  std::vector<std::uint32_t> fn;
  // Semantic confusion counts over elements whose ground truth is not ignore.
  std::uint64_t intersection = 0;
  std::uint64_t gt_elements = 0;
  std::uint64_t pred_elements = 0;

  bool has_segments() const { return !tp.empty() || !fp.empty() || !fn.empty(); }
};

// Per learning id. Classes with no elements on either side are absent.
struct SegmentMatch {
  std::map<std::uint32_t, ClassMatch> classes;

  // Appends another frame's result (dataset-level accumulation).
  void merge(const SegmentMatch& other);
};

// Segments are (class, instance) groups for thing classes and one group per
// stuff class. Thing elements with instance id 0 form no segment but still
// count towards the other side's segment areas. Elements whose ground truth is
// ignore are dropped; predicted ignore elements form no segment. Segments of
// the same class match when IoU > 0.5.
SegmentMatch match_segments(const PanopticView& pred, const PanopticView& gt,
                            const ClassMap& map);

struct ClassScores {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  double iou = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  bool thing = false;
  bool in_gt = false;
};

struct SplitScores {
  double pq = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  std::size_t classes = 0;
};

struct EvalReport {
  std::map<std::uint32_t, ClassScores> per_class;
  double pq = 0.0;
  double pq_dagger = 0.0;
  double sq = 0.0;
  double rq = 0.0;
  double miou = 0.0;
  SplitScores thing;
  SplitScores stuff;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  // Border IoU per class, filled only when requested.
  std::map<std::uint32_t, double> border_iou;
};

// Per-class scores and unweighted means over classes with at least one
// segment on either side. mIoU averages over classes present in ground truth.
EvalReport panoptic_scores(const SegmentMatch& match, const ClassMap& map);

struct IouResult {
  std::map<std::uint32_t, double> per_class;  // classes present in ground truth
  double mean = 0.0;
};
IouResult miou(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> gt,
               const ClassMap& map);

// Pixels within Chebyshev distance `width` of a ground-truth segment boundary
// (a pixel whose 4-neighbour carries a different (class, instance) pair).
std::vector<std::uint8_t> border_band(const PanopticLabel2D& gt, int width);

struct IouCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_count = 0;
};

// Per-class intersection and union over the band, for accumulation across
// frames. Ground-truth ignore pixels are skipped.
std::map<std::uint32_t, IouCounts> border_counts(const PanopticLabel2D& pred,
                                                 const PanopticLabel2D& gt, int width,
                                                 const ClassMap& map);

// Per-class IoU restricted to the band. An empty class subset means all
// classes; classes absent from the band on both sides are left out.
std::map<std::uint32_t, double> border_iou(const PanopticLabel2D& pred,
                                           const PanopticLabel2D& gt, int width,
                                           const ClassMap& map,
                                           const std::vector<std::uint32_t>& classes = {});

// Exhaustive reference: a full segment IoU table computed by scanning the
// elements for every segment pair, then greedy acceptance in descending IoU.
// Quadratic; meant for tests on small inputs.
EvalReport pq_oracle(const PanopticView& pred, const PanopticView& gt, const ClassMap& map);

enum class Split { kAll, kStuff, kThing };

std::string report_json(const EvalReport& report, const ClassMap& map, Split split = Split::kAll);
// Aligned table: class, PQ, PQ-dagger, SQ, RQ, IoU, then the aggregate and
// thing/stuff rows.
std::string report_table(const EvalReport& report, const ClassMap& map, Split split = Split::kAll);

}  // namespace lps

#endif  // LPS_METRICS_HPP_
