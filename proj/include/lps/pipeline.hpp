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

// Scan-level inference with the semantic network: projection, forward pass,
// instance proposals, panoptic fusion and back-projection to points.
//
// The toolkit has no instance head. Proposals are the 4-connected components
// of thing-class argmax pixels, scored by their mean softmax probability, so
// the control parameters that act on detections (score threshold, NMS IoU,
// proposal count) have something to act on.

#ifndef LPS_PIPELINE_HPP_
#define LPS_PIPELINE_HPP_

#include <vector>

#include "lps/fusion.hpp"
#include "lps/heads.hpp"
#include "lps/projection.hpp"
#include "lps/pseudo_label.hpp"

namespace lps {

struct PipelineConfig {
  ProjectionConfig projection;
  int net_height = 32;
  int net_width = 64;
  KnnOptions knn;
};

struct ScanLogits {
  RangeImage image;  // resized to the network extent
  Tensor logits;     // (C, net_height, net_width)
};

// Projection and forward pass; independent of the control parameters.
ScanLogits scan_logits(const SemanticNet<float>& net, const PointCloud& cloud,
                       const PipelineConfig& cfg);

std::vector<InstancePrediction> component_proposals(const Tensor& logits, const ClassMap& map,
                                                    const ControlParams& params);

// Proposals, fusion, then pixels whose top softmax probability is below the
// softmax threshold become ignore. Instance ids are renumbered from 1.
PanopticLabel2D panoptic_from_logits(const Tensor& logits, const ClassMap& map,
                                     const ControlParams& params);

// Learning-id labels per point.
LabelSet labels_from_logits(const ScanLogits& scan, const PointCloud& cloud, const ClassMap& map,
                            const ControlParams& params, const PipelineConfig& cfg);

}  // namespace lps

#endif  // LPS_PIPELINE_HPP_
