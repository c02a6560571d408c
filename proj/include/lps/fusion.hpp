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

// Fusion of semantic logits with externally supplied instance predictions,
// and the boundary-refinement periphery loss.

#ifndef LPS_FUSION_HPP_
#define LPS_FUSION_HPP_

#include <cstdint>
#include <vector>

#include "lps/autodiff.hpp"
#include "lps/io.hpp"
#include "lps/tensor.hpp"

namespace lps {

// Half-open pixel box [r0, r1) x [c0, c1).
struct BBox {
  int r0 = 0;
  int c0 = 0;
  int r1 = 0;
  int c1 = 0;

  int height() const { return r1 - r0; }
  int width() const { return c1 - c0; }
  bool contains(int r, int c) const { return r >= r0 && r < r1 && c >= c0 && c < c1; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct InstancePrediction {
  std::uint32_t class_id = 0;
  float score = 0.0f;
  BBox bbox;
  // (1, h, w) logits covering the box, or the full canvas.
  Tensor mask_logits;
};

struct FusionConfig {
  double confidence_threshold = 0.5;  // c_t
  double overlap_threshold = 0.5;     // o_t
  int min_stuff_area = 128;           // min_sa

  void validate() const;
};

// Value that replaces semantic logits outside an instance box.
inline constexpr float kSuppressedLogit = -1e4f;

struct PreparedInstance {
  std::size_t source = 0;  // index into the input list
  std::uint32_t class_id = 0;
  float score = 0.0f;
  BBox bbox;
  Tensor logits;  // (1, H, W) canvas, zero outside the box
};

// Drops instances scored below c_t, sorts the rest by descending score
// (stable), pastes each mask into a zero canvas at its box, and drops masks
// whose overlap with the already kept masks exceeds o_t of their own area.
std::vector<PreparedInstance> prepare_instance_logits(
    const std::vector<InstancePrediction>& instances, int height, int width,
    const FusionConfig& cfg);

// The instance's class channel with everything outside its box suppressed.
Tensor prepare_semantic_logits(const Tensor& semantic_logits, std::uint32_t class_id,
                               const BBox& bbox);

// (sigmoid(a) + sigmoid(b)) * (a + b), elementwise.
template <typename T>
Var<T> fuse_logits(const Var<T>& a, const Var<T>& b);
Tensor fuse_logits(const Tensor& a, const Tensor& b);

struct FusionResult {
  PanopticLabel2D panoptic;
  Tensor logits;  // stuff channels followed by one fused channel per instance
  std::vector<std::uint32_t> stuff_classes;
};

// Argmax over stuff logits and fused instance logits. Instance winners take
// the instance class and a contiguous id; other pixels take the best stuff
// class. Stuff classes covering fewer than min_sa pixels become ignore.
FusionResult canonical_panoptic(const Tensor& semantic_logits,
                                const std::vector<PreparedInstance>& instances,
                                const FusionConfig& cfg, const ClassMap& map);

// Full pipeline: prepare_instance_logits followed by canonical_panoptic.
FusionResult panoptic_fusion(const Tensor& semantic_logits,
                             const std::vector<InstancePrediction>& instances,
                             const FusionConfig& cfg, const ClassMap& map);

// Per boundary pixel of each instance, the largest squared range gap to a
// four-neighbour that belongs to no instance.
struct PeripheryTerms {
  std::vector<std::size_t> pixels;
  std::vector<double> gaps;
};
PeripheryTerms periphery_terms(const PanopticLabel2D& panoptic, const Tensor& range);

// -(1 / |B|) * sum of the boundary terms; 0 when there is no boundary pixel
// with a background neighbour.
double periphery_loss(const PanopticLabel2D& panoptic, const Tensor& range);

// Differentiable version over fusion logits (C, H, W) whose argmax produced
// the panoptic map. The value is the hard loss; the gradient is that of
// -(1 / |B|) * sum_b p_b * gap_b where p_b is the softmax probability of the
// winning channel at boundary pixel b.
template <typename T>
Var<T> periphery_loss(const Var<T>& logits, const PanopticLabel2D& panoptic, const Tensor& range);

}  // namespace lps

#endif  // LPS_FUSION_HPP_
