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

#include "lps/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lps/kernels.hpp"

namespace lps {
namespace {

double box_iou(const BBox& a, const BBox& b) {
  const int h = std::min(a.r1, b.r1) - std::max(a.r0, b.r0);
  const int w = std::min(a.c1, b.c1) - std::max(a.c0, b.c0);
  if (h <= 0 || w <= 0) return 0.0;
  const double inter = static_cast<double>(h) * w;
  const double uni = static_cast<double>(a.height()) * a.width() +
                     static_cast<double>(b.height()) * b.width() - inter;
  return inter / uni;
}

}  // namespace

ScanLogits scan_logits(const SemanticNet<float>& net, const PointCloud& cloud,
                       const PipelineConfig& cfg) {
  ScanLogits out;
  out.image = resize_for_network(project(cloud, cfg.projection), cfg.net_height, cfg.net_width);
  const HeadConfig& hc = net.config();
  const ProximityGrid grid = input_grid(out.image.channels, hc.search, hc.proximity_k);
  out.logits = net.forward(Var<float>::constant(out.image.channels), grid).value();
  return out;
}

std::vector<InstancePrediction> component_proposals(const Tensor& logits, const ClassMap& map,
                                                    const ControlParams& params) {
  params.validate();
  const int nc = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const Tensor prob = kernels::softmax_channels_forward(logits);
  std::vector<int> arg(plane, 0);
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 1; c < nc; ++c) {
      if (logits[c * plane + p] > logits[static_cast<std::size_t>(arg[p]) * plane + p]) arg[p] = c;
    }
  }
  std::vector<int> comp(plane, -1);
  std::vector<InstancePrediction> props;
  std::vector<std::size_t> stack;
  for (std::size_t seed = 0; seed < plane; ++seed) {
    const auto cls = static_cast<std::uint32_t>(arg[seed]);
    if (comp[seed] >= 0 || !map.is_thing(cls)) continue;
    const int id = static_cast<int>(props.size());
    std::vector<std::size_t> members;
    stack.assign(1, seed);
    comp[seed] = id;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      members.push_back(p);
      const int r = static_cast<int>(p) / w, c = static_cast<int>(p) % w;
      const int nr[4] = {r - 1, r + 1, r, r};
      const int ncol[4] = {c, c, c - 1, c + 1};
      for (int n = 0; n < 4; ++n) {
        if (nr[n] < 0 || nr[n] >= h || ncol[n] < 0 || ncol[n] >= w) continue;
        const std::size_t q = static_cast<std::size_t>(nr[n]) * w + ncol[n];
        if (comp[q] < 0 && arg[q] == arg[seed]) {
          comp[q] = id;
          stack.push_back(q);
        }
      }
    }
    BBox b{h, w, 0, 0};
    double score = 0.0;
    for (std::size_t p : members) {
      const int r = static_cast<int>(p) / w, c = static_cast<int>(p) % w;
      b.r0 = std::min(b.r0, r);
      b.c0 = std::min(b.c0, c);
      b.r1 = std::max(b.r1, r + 1);
      b.c1 = std::max(b.c1, c + 1);
      score += prob[cls * plane + p];
    }
    InstancePrediction ip;
    ip.class_id = cls;
    ip.score = static_cast<float>(score / static_cast<double>(members.size()));
    ip.bbox = b;
    ip.mask_logits = Tensor({1, b.height(), b.width()}, -1.0f);
    for (std::size_t p : members) {
      const int r = static_cast<int>(p) / w, c = static_cast<int>(p) % w;
      float best_other = -INFINITY;
      for (int k = 0; k < nc; ++k) {
        if (k != static_cast<int>(cls)) best_other = std::max(best_other, logits[k * plane + p]);
      }
      ip.mask_logits.at(0, r - b.r0, c - b.c0) = 1.0f + (logits[cls * plane + p] - best_other);
    }
    props.push_back(std::move(ip));
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].score >= params.score_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return props[a].score > props[b].score; });
  std::vector<InstancePrediction> kept;
  for (std::size_t i : order) {
    if (static_cast<int>(kept.size()) >= params.proposal_count) break;
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const InstancePrediction& k) {
      return box_iou(k.bbox, props[i].bbox) > params.nms_iou;
    });
    if (!suppressed) kept.push_back(std::move(props[i]));
  }
  return kept;
}

PanopticLabel2D panoptic_from_logits(const Tensor& logits, const ClassMap& map,
                                     const ControlParams& params) {
  FusionConfig fc;
  fc.confidence_threshold = params.confidence_threshold;
  fc.overlap_threshold = params.overlap_threshold;
  fc.min_stuff_area = params.min_stuff_area;
  PanopticLabel2D pan =
      panoptic_fusion(logits, component_proposals(logits, map, params), fc, map).panoptic;
  if (params.softmax_threshold > 0.0) {
    const Tensor prob = kernels::softmax_channels_forward(logits);
    const std::size_t plane = pan.size();
    for (std::size_t p = 0; p < plane; ++p) {
      float top = 0.0f;
      for (int c = 0; c < prob.dim(0); ++c) top = std::max(top, prob[c * plane + p]);
      if (top < params.softmax_threshold) {
        pan.semantic[p] = map.ignore_id();
        pan.instance[p] = 0;
      }
    }
  }
  std::map<std::uint32_t, std::uint32_t> renum;
  for (auto& id : pan.instance) {
    if (id == 0) continue;
    auto it = renum.emplace(id, static_cast<std::uint32_t>(renum.size() + 1)).first;
    id = it->second;
  }
  return pan;
}

LabelSet labels_from_logits(const ScanLogits& scan, const PointCloud& cloud, const ClassMap& map,
                            const ControlParams& params, const PipelineConfig& cfg) {
  if (scan.logits.dim(0) != map.num_classes()) {
    throw Error(ErrorKind::kValidation,
                "network predicts " + std::to_string(scan.logits.dim(0)) +
                    " classes but the class map has " + std::to_string(map.num_classes()),
                {{"class_map", map.name()}});
  }
  return backproject_knn(panoptic_from_logits(scan.logits, map, params), scan.image, cloud,
                         cfg.knn, map.ignore_id());
}

}  // namespace lps
