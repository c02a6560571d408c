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

// Reference PQ computation that shares no code with match_segments.

#include <algorithm>
#include <tuple>
#include <vector>

#include "lps/metrics.hpp"

namespace lps {
namespace {

struct Segment {
  std::uint32_t cls;
  std::uint32_t inst;
};

bool same(const Segment& a, const Segment& b) { return a.cls == b.cls && a.inst == b.inst; }

// Collects the distinct segments on one side in first-seen order.
std::vector<Segment> segments(const PanopticView& v, const PanopticView& gt, const ClassMap& map) {
  std::vector<Segment> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (gt.semantic[i] == map.ignore_id()) continue;
    const std::uint32_t c = v.semantic[i];
    if (c == map.ignore_id()) continue;
    Segment s{c, map.is_thing(c) ? v.instance[i] : 0u};
    if (map.is_thing(c) && s.inst == 0) continue;
    if (std::none_of(out.begin(), out.end(), [&](const Segment& o) { return same(o, s); })) {
      out.push_back(s);
    }
  }
  return out;
}

bool member(const PanopticView& v, std::size_t i, const Segment& s, const ClassMap& map) {
  if (v.semantic[i] != s.cls) return false;
  return !map.is_thing(s.cls) || v.instance[i] == s.inst;
}

}  // namespace

EvalReport pq_oracle(const PanopticView& pred, const PanopticView& gt, const ClassMap& map) {
  if (pred.size() != gt.size() || pred.semantic.size() != pred.instance.size() ||
      gt.semantic.size() != gt.instance.size()) {
    throw Error(ErrorKind::kShape, "oracle inputs differ in length");
  }
  const std::vector<Segment> ps = segments(pred, gt, map);
  const std::vector<Segment> gs = segments(gt, gt, map);

  // Full IoU table by scanning every element per pair.
  struct Cand {
    double iou;
    std::size_t p, g;
  };
  std::vector<Cand> cands;
  for (std::size_t a = 0; a < ps.size(); ++a) {
    for (std::size_t b = 0; b < gs.size(); ++b) {
      if (ps[a].cls != gs[b].cls) continue;
      std::uint64_t inter = 0, uni = 0;
      for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt.semantic[i] == map.ignore_id()) continue;
        const bool in_p = member(pred, i, ps[a], map);
        const bool in_g = member(gt, i, gs[b], map);
        inter += (in_p && in_g) ? 1 : 0;
        uni += (in_p || in_g) ? 1 : 0;
      }
      if (inter > 0) cands.push_back({static_cast<double>(inter) / static_cast<double>(uni), a, b});
    }
  }
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& x, const Cand& y) { return x.iou > y.iou; });
  std::vector<bool> p_used(ps.size(), false), g_used(gs.size(), false);
  // (class, gt instance, iou) of the accepted pairs.
  std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> accepted;
  for (const Cand& c : cands) {
    if (c.iou <= 0.5 || p_used[c.p] || g_used[c.g]) continue;
    p_used[c.p] = g_used[c.g] = true;
    accepted.emplace_back(gs[c.g].cls, gs[c.g].inst, c.iou);
  }
  std::sort(accepted.begin(), accepted.end());

  EvalReport r;
  const auto nc = static_cast<std::uint32_t>(map.num_classes());
  double pq = 0, pqd = 0, sq = 0, rq = 0, iou_sum = 0;
  std::size_t n = 0, n_iou = 0;
  for (std::uint32_t cls = 0; cls < nc; ++cls) {
    std::uint64_t inter = 0, g_n = 0, p_n = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt.semantic[i] == map.ignore_id()) continue;
      g_n += gt.semantic[i] == cls;
      p_n += pred.semantic[i] == cls;
      inter += (gt.semantic[i] == cls && pred.semantic[i] == cls);
    }
    std::size_t tp = 0, fp = 0, fn = 0;
    double tp_iou = 0.0;
    for (const auto& [c, inst, v] : accepted) {
      if (c != cls) continue;
      ++tp;
      tp_iou += v;
    }
    for (std::size_t a = 0; a < ps.size(); ++a) fp += (ps[a].cls == cls && !p_used[a]);
    for (std::size_t b = 0; b < gs.size(); ++b) fn += (gs[b].cls == cls && !g_used[b]);
    if (g_n == 0 && p_n == 0 && tp + fp + fn == 0) continue;
    ClassScores s;
    s.thing = map.is_thing(cls);
    s.in_gt = g_n > 0;
    s.tp = tp;
    s.fp = fp;
    s.fn = fn;
    const double half = static_cast<double>(tp) + 0.5 * static_cast<double>(fp) +
                        0.5 * static_cast<double>(fn);
    s.sq = tp ? tp_iou / static_cast<double>(tp) : 0.0;
    s.rq = half > 0 ? static_cast<double>(tp) / half : 0.0;
    s.pq = half > 0 ? tp_iou / half : 0.0;
    const std::uint64_t u = g_n + p_n - inter;
    s.iou = u ? static_cast<double>(inter) / static_cast<double>(u) : 0.0;
    r.tp += tp;
    r.fp += fp;
    r.fn += fn;
    if (s.in_gt) {
      iou_sum += s.iou;
      ++n_iou;
    }
    if (tp + fp + fn > 0) {
      pq += s.pq;
      pqd += s.thing ? s.pq : s.iou;
      sq += s.sq;
      rq += s.rq;
      ++n;
      SplitScores& sp = s.thing ? r.thing : r.stuff;
      sp.pq += s.pq;
      sp.sq += s.sq;
      sp.rq += s.rq;
      ++sp.classes;
    }
    r.per_class[cls] = s;
  }
  if (n) {
    r.pq = pq / static_cast<double>(n);
    r.pq_dagger = pqd / static_cast<double>(n);
    r.sq = sq / static_cast<double>(n);
    r.rq = rq / static_cast<double>(n);
  }
  if (n_iou) r.miou = iou_sum / static_cast<double>(n_iou);
  for (SplitScores* sp : {&r.thing, &r.stuff}) {
    if (!sp->classes) continue;
    const double k = static_cast<double>(sp->classes);
    sp->pq /= k;
    sp->sq /= k;
    sp->rq /= k;
  }
  return r;
}

}  // namespace lps
