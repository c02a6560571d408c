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

#include "lps/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <set>
#include <utility>

#include "json.hpp"

namespace lps {
namespace {

using SegKey = std::pair<std::uint32_t, std::uint32_t>;  // (class, instance)
constexpr std::uint32_t kNoSegment = std::numeric_limits<std::uint32_t>::max();

void check_view(const PanopticView& v, const char* side) {
  if (v.semantic.size() != v.instance.size()) {
    throw Error(ErrorKind::kShape,
                std::string(side) + " has " + std::to_string(v.semantic.size()) +
                    " semantic and " + std::to_string(v.instance.size()) + " instance entries",
                {{"side", side}});
  }
}

void check_lengths(const PanopticView& pred, const PanopticView& gt) {
  check_view(pred, "prediction");
  check_view(gt, "ground truth");
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::kShape,
                "prediction has " + std::to_string(pred.size()) + " elements, ground truth " +
                    std::to_string(gt.size()),
                {{"pred", std::to_string(pred.size())}, {"gt", std::to_string(gt.size())}});
  }
}

void check_class(std::uint32_t c, const ClassMap& map, std::size_t index, const char* side) {
  if (c != map.ignore_id() && c >= static_cast<std::uint32_t>(map.num_classes())) {
    throw Error(ErrorKind::kRange,
                std::string(side) + " element " + std::to_string(index) + " has class " +
                    std::to_string(c) + " outside the class map",
                {{"index", std::to_string(index)}, {"class", std::to_string(c)}, {"side", side}});
  }
}

// Instance id of the segment an element belongs to, or kNoSegment.
std::uint32_t segment_of(std::uint32_t cls, std::uint32_t inst, const ClassMap& map) {
  if (cls == map.ignore_id()) return kNoSegment;
  if (map.is_stuff(cls)) return 0;
  return inst == 0 ? kNoSegment : inst;
}

double safe_div(double a, double b) { return b > 0.0 ? a / b : 0.0; }

}  // namespace

void SegmentMatch::merge(const SegmentMatch& other) {
  for (const auto& [cls, m] : other.classes) {
    ClassMatch& dst = classes[cls];
    dst.tp.insert(dst.tp.end(), m.tp.begin(), m.tp.end());
    dst.fp.insert(dst.fp.end(), m.fp.begin(), m.fp.end());
    dst.fn.insert(dst.fn.end(), m.fn.begin(), m.fn.end());
    dst.intersection += m.intersection;
    dst.gt_elements += m.gt_elements;
    dst.pred_elements += m.pred_elements;
  }
}

SegmentMatch match_segments(const PanopticView& pred, const PanopticView& gt,
                            const ClassMap& map) {
  check_lengths(pred, gt);
  SegmentMatch out;
  std::map<SegKey, std::uint64_t> pred_area, gt_area;
  std::map<std::pair<SegKey, SegKey>, std::uint64_t> overlap;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const std::uint32_t g = gt.semantic[i];
    const std::uint32_t p = pred.semantic[i];
    check_class(g, map, i, "ground truth");
    check_class(p, map, i, "prediction");
    if (g == map.ignore_id()) continue;
    ClassMatch& gm = out.classes[g];
    ++gm.gt_elements;
    if (p != map.ignore_id()) {
      ClassMatch& pm = out.classes[p];
      ++pm.pred_elements;
      if (p == g) ++pm.intersection;
    }
    const std::uint32_t gs = segment_of(g, gt.instance[i], map);
    const std::uint32_t ps = segment_of(p, pred.instance[i], map);
    if (gs != kNoSegment) ++gt_area[{g, gs}];
    if (ps != kNoSegment) ++pred_area[{p, ps}];
    if (gs != kNoSegment && ps != kNoSegment && p == g) ++overlap[{{p, ps}, {g, gs}}];
  }

  std::set<SegKey> matched_pred, matched_gt;
  for (const auto& [key, inter] : overlap) {
    const auto& [pk, gk] = key;
    const double uni = static_cast<double>(pred_area[pk] + gt_area[gk] - inter);
    const double iou = static_cast<double>(inter) / uni;
    if (iou > 0.5) {
      out.classes[gk.first].tp.push_back({pk.second, gk.second, iou});
      matched_pred.insert(pk);
      matched_gt.insert(gk);
    }
  }
  for (auto& [cls, m] : out.classes) {
    std::sort(m.tp.begin(), m.tp.end(),
              [](const TpPair& a, const TpPair& b) { return a.gt < b.gt; });
  }
  for (const auto& [pk, area] : pred_area) {
    if (!matched_pred.count(pk)) out.classes[pk.first].fp.push_back(pk.second);
  }
  for (const auto& [gk, area] : gt_area) {
    if (!matched_gt.count(gk)) out.classes[gk.first].fn.push_back(gk.second);
  }
  return out;
}

EvalReport panoptic_scores(const SegmentMatch& match, const ClassMap& map) {
  EvalReport r;
  double pq = 0, pqd = 0, sq = 0, rq = 0, iou = 0;
  std::size_t n = 0, n_iou = 0;
  for (const auto& [cls, m] : match.classes) {
    ClassScores s;
    s.thing = map.is_thing(cls);
    s.in_gt = m.gt_elements > 0;
    s.tp = m.tp.size();
    s.fp = m.fp.size();
    s.fn = m.fn.size();
    double iou_sum = 0.0;
    for (const TpPair& t : m.tp) iou_sum += t.iou;
    const double denom =
        static_cast<double>(s.tp) + 0.5 * static_cast<double>(s.fp) + 0.5 * static_cast<double>(s.fn);
    s.sq = safe_div(iou_sum, static_cast<double>(s.tp));
    s.rq = safe_div(static_cast<double>(s.tp), denom);
    s.pq = safe_div(iou_sum, denom);
    s.iou = safe_div(static_cast<double>(m.intersection),
                     static_cast<double>(m.gt_elements + m.pred_elements - m.intersection));
    r.tp += s.tp;
    r.fp += s.fp;
    r.fn += s.fn;
    if (s.in_gt) {
      iou += s.iou;
      ++n_iou;
    }
    if (m.has_segments()) {
      pq += s.pq;
      pqd += s.thing ? s.pq : s.iou;
      sq += s.sq;
      rq += s.rq;
      ++n;
      SplitScores& split = s.thing ? r.thing : r.stuff;
      split.pq += s.pq;
      split.sq += s.sq;
      split.rq += s.rq;
      ++split.classes;
    }
    r.per_class[cls] = s;
  }
  const double dn = static_cast<double>(n);
  r.pq = safe_div(pq, dn);
  r.pq_dagger = safe_div(pqd, dn);
  r.sq = safe_div(sq, dn);
  r.rq = safe_div(rq, dn);
  r.miou = safe_div(iou, static_cast<double>(n_iou));
  for (SplitScores* split : {&r.thing, &r.stuff}) {
    const double k = static_cast<double>(split->classes);
    split->pq = safe_div(split->pq, k);
    split->sq = safe_div(split->sq, k);
    split->rq = safe_div(split->rq, k);
  }
  return r;
}

IouResult miou(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> gt,
               const ClassMap& map) {
  if (pred.size() != gt.size()) {
    throw Error(ErrorKind::kShape,
                "prediction has " + std::to_string(pred.size()) + " elements, ground truth " +
                    std::to_string(gt.size()),
                {{"pred", std::to_string(pred.size())}, {"gt", std::to_string(gt.size())}});
  }
  const auto nc = static_cast<std::size_t>(map.num_classes());
  std::vector<std::uint64_t> inter(nc, 0), gt_n(nc, 0), pred_n(nc, 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    check_class(gt[i], map, i, "ground truth");
    check_class(pred[i], map, i, "prediction");
    if (gt[i] == map.ignore_id()) continue;
    ++gt_n[gt[i]];
    if (pred[i] == map.ignore_id()) continue;
    ++pred_n[pred[i]];
    if (pred[i] == gt[i]) ++inter[gt[i]];
  }
  IouResult r;
  double sum = 0.0;
  for (std::size_t c = 0; c < nc; ++c) {
    if (gt_n[c] == 0) continue;
    const double v = static_cast<double>(inter[c]) /
                     static_cast<double>(gt_n[c] + pred_n[c] - inter[c]);
    r.per_class[static_cast<std::uint32_t>(c)] = v;
    sum += v;
  }
  r.mean = safe_div(sum, static_cast<double>(r.per_class.size()));
  return r;
}

std::vector<std::uint8_t> border_band(const PanopticLabel2D& gt, int width) {
  if (width < 0) {
    throw Error(ErrorKind::kValidation, "border width must be >= 0",
                {{"width", std::to_string(width)}});
  }
  const int h = gt.height, w = gt.width;
  std::vector<std::uint8_t> boundary(gt.size(), 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t p = gt.index(r, c);
      const auto differs = [&](int rr, int cc) {
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) return false;
        const std::size_t q = gt.index(rr, cc);
        return gt.semantic[q] != gt.semantic[p] || gt.instance[q] != gt.instance[p];
      };
      if (differs(r - 1, c) || differs(r + 1, c) || differs(r, c - 1) || differs(r, c + 1)) {
        boundary[p] = 1;
      }
    }
  }
  // Separable Chebyshev dilation: rows, then columns.
  std::vector<std::uint8_t> tmp(gt.size(), 0), band(gt.size(), 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int d = std::max(0, c - width); d <= std::min(w - 1, c + width); ++d) {
        if (boundary[gt.index(r, d)]) {
          tmp[gt.index(r, c)] = 1;
          break;
        }
      }
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int d = std::max(0, r - width); d <= std::min(h - 1, r + width); ++d) {
        if (tmp[gt.index(d, c)]) {
          band[gt.index(r, c)] = 1;
          break;
        }
      }
    }
  }
  return band;
}

std::map<std::uint32_t, IouCounts> border_counts(const PanopticLabel2D& pred,
                                                 const PanopticLabel2D& gt, int width,
                                                 const ClassMap& map) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw Error(ErrorKind::kShape,
                "prediction is " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                    ", ground truth " + std::to_string(gt.height) + "x" + std::to_string(gt.width),
                {{"pred", std::to_string(pred.height) + "x" + std::to_string(pred.width)},
                 {"gt", std::to_string(gt.height) + "x" + std::to_string(gt.width)}});
  }
  const std::vector<std::uint8_t> band = border_band(gt, width);
  std::map<std::uint32_t, IouCounts> out;
  for (std::size_t p = 0; p < band.size(); ++p) {
    if (!band[p]) continue;
    const std::uint32_t g = gt.semantic[p], q = pred.semantic[p];
    check_class(g, map, p, "ground truth");
    check_class(q, map, p, "prediction");
    if (g == map.ignore_id()) continue;
    ++out[g].union_count;
    if (q == g) {
      ++out[g].intersection;
    } else if (q != map.ignore_id()) {
      ++out[q].union_count;
    }
  }
  return out;
}

std::map<std::uint32_t, double> border_iou(const PanopticLabel2D& pred,
                                           const PanopticLabel2D& gt, int width,
                                           const ClassMap& map,
                                           const std::vector<std::uint32_t>& classes) {
  std::map<std::uint32_t, double> out;
  for (const auto& [cls, c] : border_counts(pred, gt, width, map)) {
    if (!classes.empty() && std::find(classes.begin(), classes.end(), cls) == classes.end()) {
      continue;
    }
    out[cls] = static_cast<double>(c.intersection) / static_cast<double>(c.union_count);
  }
  return out;
}

namespace {

const char* split_name(Split s) {
  switch (s) {
    case Split::kStuff:
      return "stuff";
    case Split::kThing:
      return "thing";
    case Split::kAll:
      break;
  }
  return "all";
}

bool in_split(const ClassScores& s, Split split) {
  return split == Split::kAll || (split == Split::kThing) == s.thing;
}

}  // namespace

std::string report_json(const EvalReport& report, const ClassMap& map, Split split) {
  using nlohmann::json;
  json classes = json::array();
  for (const auto& [cls, s] : report.per_class) {
    if (!in_split(s, split)) continue;
    json c = {{"id", cls},         {"name", map.class_name(cls)},
              {"thing", s.thing},  {"pq", s.pq},
              {"sq", s.sq},        {"rq", s.rq},
              {"iou", s.iou},      {"tp", s.tp},
              {"fp", s.fp},        {"fn", s.fn}};
    auto b = report.border_iou.find(cls);
    if (b != report.border_iou.end()) c["border_iou"] = b->second;
    classes.push_back(std::move(c));
  }
  json j = {{"format", "lpskit-eval"},
            {"version", 1},
            {"class_map", map.name()},
            {"split", split_name(split)},
            {"pq", report.pq},
            {"pq_dagger", report.pq_dagger},
            {"sq", report.sq},
            {"rq", report.rq},
            {"pq_th", report.thing.pq},
            {"sq_th", report.thing.sq},
            {"rq_th", report.thing.rq},
            {"pq_st", report.stuff.pq},
            {"sq_st", report.stuff.sq},
            {"rq_st", report.stuff.rq},
            {"miou", report.miou},
            {"tp", report.tp},
            {"fp", report.fp},
            {"fn", report.fn},
            {"classes", std::move(classes)}};
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& report, const ClassMap& map, Split split) {
  std::string out;
  char line[256];
  const auto row = [&](const std::string& name, double pq, double pqd, double sq, double rq,
                       double iou) {
    std::snprintf(line, sizeof(line), "%-16s %7.2f %7.2f %7.2f %7.2f %7.2f\n", name.c_str(),
                  100.0 * pq, 100.0 * pqd, 100.0 * sq, 100.0 * rq, 100.0 * iou);
    out += line;
  };
  std::snprintf(line, sizeof(line), "%-16s %7s %7s %7s %7s %7s\n", "class", "PQ", "PQ_dag", "SQ",
                "RQ", "IoU");
  out += line;
  for (const auto& [cls, s] : report.per_class) {
    if (!in_split(s, split)) continue;
    row(map.class_name(cls), s.pq, s.thing ? s.pq : s.iou, s.sq, s.rq, s.iou);
  }
  out += "\n";
  std::snprintf(line, sizeof(line), "%7s %7s %7s %7s %7s %7s %7s %7s %7s %7s %7s\n", "PQ", "PQ_dag",
                "SQ", "RQ", "PQ_Th", "SQ_Th", "RQ_Th", "PQ_St", "SQ_St", "RQ_St", "mIoU");
  out += line;
  std::snprintf(line, sizeof(line),
                "%7.2f %7.2f %7.2f %7.2f %7.2f %7.2f %7.2f %7.2f %7.2f %7.2f %7.2f\n",
                100.0 * report.pq, 100.0 * report.pq_dagger, 100.0 * report.sq,
                100.0 * report.rq, 100.0 * report.thing.pq, 100.0 * report.thing.sq,
                100.0 * report.thing.rq, 100.0 * report.stuff.pq, 100.0 * report.stuff.sq,
                100.0 * report.stuff.rq, 100.0 * report.miou);
  out += line;
  return out;
}

}  // namespace lps
