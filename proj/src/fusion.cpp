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

#include "lps/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lps/kernels.hpp"
#include "lps/ops.hpp"

namespace lps {
namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

std::string box_str(const BBox& b) {
  return "[" + std::to_string(b.r0) + ", " + std::to_string(b.c0) + ", " + std::to_string(b.r1) +
         ", " + std::to_string(b.c1) + ")";
}

void check_box(const BBox& b, int h, int w, std::size_t index) {
  if (b.r0 < 0 || b.c0 < 0 || b.r1 > h || b.c1 > w || b.r0 >= b.r1 || b.c0 >= b.c1) {
    throw Error(ErrorKind::kValidation,
                "instance " + std::to_string(index) + " has box " + box_str(b) +
                    " outside or empty on a " + std::to_string(h) + "x" + std::to_string(w) +
                    " canvas",
                {{"index", std::to_string(index)}, {"bbox", box_str(b)}});
  }
}

// Accepts (H, W) or (1, H, W).
void range_extent(const Tensor& range, int* h, int* w) {
  if (range.rank() == 2) {
    *h = range.dim(0);
    *w = range.dim(1);
  } else if (range.rank() == 3 && range.dim(0) == 1) {
    *h = range.dim(1);
    *w = range.dim(2);
  } else {
    throw Error(ErrorKind::kShape, "range map must be (H, W) or (1, H, W), got " +
                                       shape_str(range.shape()),
                {{"range", shape_str(range.shape())}});
  }
}

}  // namespace

void FusionConfig::validate() const {
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw Error(ErrorKind::kValidation, "confidence threshold must lie in [0, 1]",
                {{"key", "confidence_threshold"}});
  }
  if (!(overlap_threshold >= 0.0 && overlap_threshold <= 1.0)) {
    throw Error(ErrorKind::kValidation, "overlap threshold must lie in [0, 1]",
                {{"key", "overlap_threshold"}});
  }
  if (min_stuff_area < 0) {
    throw Error(ErrorKind::kValidation, "min stuff area must be >= 0",
                {{"key", "min_stuff_area"}});
  }
}

std::vector<PreparedInstance> prepare_instance_logits(
    const std::vector<InstancePrediction>& instances, int height, int width,
    const FusionConfig& cfg) {
  cfg.validate();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    check_box(instances[i].bbox, height, width, i);
    if (instances[i].score >= cfg.confidence_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return instances[a].score > instances[b].score;
  });

  std::vector<PreparedInstance> kept;
  std::vector<std::uint8_t> occupied(static_cast<std::size_t>(height) * width, 0);
  for (std::size_t idx : order) {
    const InstancePrediction& inst = instances[idx];
    const BBox& b = inst.bbox;
    Tensor mask = inst.mask_logits;
    if (mask.rank() == 2) mask = Tensor({1, mask.dim(0), mask.dim(1)}, mask.storage());
    if (mask.rank() != 3 || mask.dim(0) != 1 || mask.dim(1) == 0 || mask.dim(2) == 0) {
      throw Error(ErrorKind::kShape,
                  "instance " + std::to_string(idx) + " mask must be (1, h, w), got " +
                      shape_str(inst.mask_logits.shape()),
                  {{"index", std::to_string(idx)}, {"mask", shape_str(inst.mask_logits.shape())}});
    }
    PreparedInstance p;
    p.source = idx;
    p.class_id = inst.class_id;
    p.score = inst.score;
    p.bbox = b;
    p.logits = Tensor({1, height, width});
    const bool full_canvas = mask.dim(1) == height && mask.dim(2) == width;
    if (full_canvas) {
      for (int r = b.r0; r < b.r1; ++r) {
        for (int c = b.c0; c < b.c1; ++c) p.logits.at(0, r, c) = mask.at(0, r, c);
      }
    } else {
      const Tensor fitted = (mask.dim(1) == b.height() && mask.dim(2) == b.width())
                                ? mask
                                : kernels::resize_bilinear_forward(mask, b.height(), b.width());
      for (int r = b.r0; r < b.r1; ++r) {
        for (int c = b.c0; c < b.c1; ++c) {
          p.logits.at(0, r, c) = fitted.at(0, r - b.r0, c - b.c0);
        }
      }
    }
    std::size_t area = 0, overlap = 0;
    for (std::size_t px = 0; px < occupied.size(); ++px) {
      if (p.logits[px] > 0.0f) {
        ++area;
        overlap += occupied[px];
      }
    }
    if (area == 0) continue;
    if (static_cast<double>(overlap) / static_cast<double>(area) > cfg.overlap_threshold) continue;
    for (std::size_t px = 0; px < occupied.size(); ++px) {
      if (p.logits[px] > 0.0f) occupied[px] = 1;
    }
    kept.push_back(std::move(p));
  }
  return kept;
}

Tensor prepare_semantic_logits(const Tensor& semantic_logits, std::uint32_t class_id,
                               const BBox& bbox) {
  if (semantic_logits.rank() != 3) {
    throw Error(ErrorKind::kShape, "semantic logits must be (C, H, W), got " +
                                       shape_str(semantic_logits.shape()),
                {{"logits", shape_str(semantic_logits.shape())}});
  }
  if (class_id >= static_cast<std::uint32_t>(semantic_logits.dim(0))) {
    throw Error(ErrorKind::kRange,
                "semantic logits " + shape_str(semantic_logits.shape()) + " have no channel " +
                    std::to_string(class_id),
                {{"class", std::to_string(class_id)},
                 {"logits", shape_str(semantic_logits.shape())}});
  }
  const int h = semantic_logits.dim(1), w = semantic_logits.dim(2);
  check_box(bbox, h, w, 0);
  Tensor out({1, h, w}, kSuppressedLogit);
  for (int r = bbox.r0; r < bbox.r1; ++r) {
    for (int c = bbox.c0; c < bbox.c1; ++c) {
      out.at(0, r, c) = semantic_logits.at(static_cast<int>(class_id), r, c);
    }
  }
  return out;
}

template <typename T>
Var<T> fuse_logits(const Var<T>& a, const Var<T>& b) {
  return ops::hadamard(ops::add(ops::sigmoid(a), ops::sigmoid(b)), ops::add(a, b));
}

Tensor fuse_logits(const Tensor& a, const Tensor& b) {
  return fuse_logits(Var<float>::constant(a), Var<float>::constant(b)).value();
}

FusionResult canonical_panoptic(const Tensor& semantic_logits,
                                const std::vector<PreparedInstance>& instances,
                                const FusionConfig& cfg, const ClassMap& map) {
  cfg.validate();
  if (semantic_logits.rank() != 3 || semantic_logits.dim(0) != map.num_classes()) {
    throw Error(ErrorKind::kShape,
                "semantic logits " + shape_str(semantic_logits.shape()) + " do not carry " +
                    std::to_string(map.num_classes()) + " class channels",
                {{"logits", shape_str(semantic_logits.shape())},
                 {"classes", std::to_string(map.num_classes())}});
  }
  const int h = semantic_logits.dim(1), w = semantic_logits.dim(2);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  FusionResult res;
  res.stuff_classes = map.stuff_ids();
  const int ns = static_cast<int>(res.stuff_classes.size());
  const int ni = static_cast<int>(instances.size());
  if (ns == 0) {
    throw Error(ErrorKind::kValidation, "class map has no stuff classes",
                {{"class_map", map.name()}});
  }
  res.logits = Tensor({ns + ni, h, w});
  for (int s = 0; s < ns; ++s) {
    std::copy_n(semantic_logits.storage().begin() +
                    static_cast<std::ptrdiff_t>(res.stuff_classes[static_cast<std::size_t>(s)] * plane),
                plane, res.logits.storage().begin() + static_cast<std::ptrdiff_t>(s * plane));
  }
  for (int i = 0; i < ni; ++i) {
    const PreparedInstance& inst = instances[static_cast<std::size_t>(i)];
    if (!map.is_thing(inst.class_id)) {
      throw Error(ErrorKind::kValidation,
                  "instance " + std::to_string(inst.source) + " has class " +
                      std::to_string(inst.class_id) + ", which is not a thing class",
                  {{"index", std::to_string(inst.source)}, {"class", std::to_string(inst.class_id)}});
    }
    const Tensor fused =
        fuse_logits(inst.logits, prepare_semantic_logits(semantic_logits, inst.class_id, inst.bbox));
    std::copy(fused.storage().begin(), fused.storage().end(),
              res.logits.storage().begin() + static_cast<std::ptrdiff_t>((ns + i) * plane));
  }

  res.panoptic = PanopticLabel2D(h, w, map.ignore_id(), 0);
  std::vector<int> winner(plane);
  std::vector<std::uint32_t> new_id(static_cast<std::size_t>(ni), 0);
  for (std::size_t p = 0; p < plane; ++p) {
    int best = 0;
    for (int c = 1; c < ns + ni; ++c) {
      if (res.logits[c * plane + p] > res.logits[static_cast<std::size_t>(best) * plane + p]) {
        best = c;
      }
    }
    winner[p] = best;
  }
  // Contiguous ids for the instances that win at least one pixel, in
  // descending-score order.
  std::vector<std::uint8_t> wins(static_cast<std::size_t>(ni), 0);
  for (int wnr : winner) {
    if (wnr >= ns) wins[static_cast<std::size_t>(wnr - ns)] = 1;
  }
  std::uint32_t next = 1;
  for (int i = 0; i < ni; ++i) {
    if (wins[static_cast<std::size_t>(i)]) new_id[static_cast<std::size_t>(i)] = next++;
  }
  std::vector<std::size_t> stuff_area(static_cast<std::size_t>(ns), 0);
  for (std::size_t p = 0; p < plane; ++p) {
    if (winner[p] >= ns) {
      const auto i = static_cast<std::size_t>(winner[p] - ns);
      res.panoptic.semantic[p] = instances[i].class_id;
      res.panoptic.instance[p] = new_id[i];
      continue;
    }
    int best = 0;
    for (int s = 1; s < ns; ++s) {
      if (res.logits[s * plane + p] > res.logits[static_cast<std::size_t>(best) * plane + p]) {
        best = s;
      }
    }
    res.panoptic.semantic[p] = res.stuff_classes[static_cast<std::size_t>(best)];
    ++stuff_area[static_cast<std::size_t>(best)];
  }
  for (int s = 0; s < ns; ++s) {
    if (stuff_area[static_cast<std::size_t>(s)] >= static_cast<std::size_t>(cfg.min_stuff_area)) {
      continue;
    }
    const std::uint32_t cls = res.stuff_classes[static_cast<std::size_t>(s)];
    for (std::size_t p = 0; p < plane; ++p) {
      if (res.panoptic.instance[p] == 0 && res.panoptic.semantic[p] == cls) {
        res.panoptic.semantic[p] = map.ignore_id();
      }
    }
  }
  return res;
}

FusionResult panoptic_fusion(const Tensor& semantic_logits,
                             const std::vector<InstancePrediction>& instances,
                             const FusionConfig& cfg, const ClassMap& map) {
  if (semantic_logits.rank() != 3) {
    throw Error(ErrorKind::kShape, "semantic logits must be (C, H, W), got " +
                                       shape_str(semantic_logits.shape()),
                {{"logits", shape_str(semantic_logits.shape())}});
  }
  return canonical_panoptic(
      semantic_logits,
      prepare_instance_logits(instances, semantic_logits.dim(1), semantic_logits.dim(2), cfg), cfg,
      map);
}

PeripheryTerms periphery_terms(const PanopticLabel2D& panoptic, const Tensor& range) {
  int h, w;
  range_extent(range, &h, &w);
  if (h != panoptic.height || w != panoptic.width) {
    throw Error(ErrorKind::kShape,
                "range map " + shape_str(range.shape()) + " does not match panoptic " +
                    std::to_string(panoptic.height) + "x" + std::to_string(panoptic.width),
                {{"range", shape_str(range.shape())}});
  }
  PeripheryTerms terms;
  const auto& rv = range.storage();
  constexpr int kDr[4] = {-1, 1, 0, 0};
  constexpr int kDc[4] = {0, 0, -1, 1};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t p = panoptic.index(r, c);
      if (panoptic.instance[p] == 0) continue;
      bool boundary = false;
      bool has_background = false;
      double best = 0.0;
      for (int n = 0; n < 4; ++n) {
        const int rr = r + kDr[n], cc = c + kDc[n];
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        const std::size_t q = panoptic.index(rr, cc);
        const bool same = panoptic.instance[q] == panoptic.instance[p] &&
                          panoptic.semantic[q] == panoptic.semantic[p];
        if (same) continue;
        boundary = true;
        if (panoptic.instance[q] != 0) continue;
        const double d = static_cast<double>(rv[p]) - static_cast<double>(rv[q]);
        best = has_background ? std::max(best, d * d) : d * d;
        has_background = true;
      }
      if (boundary && has_background) {
        terms.pixels.push_back(p);
        terms.gaps.push_back(best);
      }
    }
  }
  return terms;
}

double periphery_loss(const PanopticLabel2D& panoptic, const Tensor& range) {
  const PeripheryTerms t = periphery_terms(panoptic, range);
  if (t.pixels.empty()) return 0.0;
  double sum = 0.0;
  for (double g : t.gaps) sum += g;
  return -sum / static_cast<double>(t.pixels.size());
}

template <typename T>
Var<T> periphery_loss(const Var<T>& logits, const PanopticLabel2D& panoptic, const Tensor& range) {
  const auto& lv = logits.value();
  if (lv.rank() != 3 || lv.dim(1) != panoptic.height || lv.dim(2) != panoptic.width) {
    throw Error(ErrorKind::kShape,
                "periphery logits " + shape_str(lv.shape()) + " do not match the panoptic map",
                {{"logits", shape_str(lv.shape())}});
  }
  PeripheryTerms terms = periphery_terms(panoptic, range);
  const double value = periphery_loss(panoptic, range);
  const int ch = lv.dim(0);
  const std::size_t plane = panoptic.size();
  return make_result<T>(
      BasicTensor<T>({1}, static_cast<T>(value)), {logits},
      [terms = std::move(terms), ch, plane](const BasicTensor<T>& g,
                                            std::vector<NodePtr<T>>& parents) {
        auto& n = parents[0];
        if (!n->requires_grad || terms.pixels.empty()) return;
        n->ensure_grad();
        const auto& x = n->value;
        const T scale = -g[0] / static_cast<T>(terms.pixels.size());
        std::vector<T> prob(static_cast<std::size_t>(ch));
        for (std::size_t j = 0; j < terms.pixels.size(); ++j) {
          const std::size_t p = terms.pixels[j];
          int best = 0;
          T m = x[p];
          for (int c = 1; c < ch; ++c) {
            if (x[c * plane + p] > m) {
              m = x[c * plane + p];
              best = c;
            }
          }
          T s = T(0);
          for (int c = 0; c < ch; ++c) {
            prob[static_cast<std::size_t>(c)] = std::exp(x[c * plane + p] - m);
            s += prob[static_cast<std::size_t>(c)];
          }
          for (auto& v : prob) v /= s;
          // d p_best / d x_c = p_best * (1[c == best] - p_c)
          const T pb = prob[static_cast<std::size_t>(best)];
          const T k = scale * static_cast<T>(terms.gaps[j]);
          for (int c = 0; c < ch; ++c) {
            const T d = pb * ((c == best ? T(1) : T(0)) - prob[static_cast<std::size_t>(c)]);
            n->grad[c * plane + p] += k * d;
          }
        }
      });
}

template Var<float> fuse_logits(const Var<float>&, const Var<float>&);
template Var<double> fuse_logits(const Var<double>&, const Var<double>&);
template Var<float> periphery_loss(const Var<float>&, const PanopticLabel2D&, const Tensor&);
template Var<double> periphery_loss(const Var<double>&, const PanopticLabel2D&, const Tensor&);

}  // namespace lps
