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

#ifndef LPS_IMAGE_IO_HPP_
#define LPS_IMAGE_IO_HPP_

#include <filesystem>
#include <optional>

#include "lps/io.hpp"
#include "lps/projection.hpp"

namespace lps {

// A projected scan on disk: a JSON sidecar naming raw little-endian planes
// that sit next to it.
//
//   <stem>.json           sidecar (format "lpskit-range-image", version 1)
//   <stem>.f32            (5, H, W) float32, channel-major
//   <stem>.valid.u8       H*W bytes
//   <stem>.p2px.i32       pixel index of every point
//   <stem>.px2p.i32       winning point of every pixel, -1 when empty
//   <stem>.semantic.u32   optional learning-id planes
//   <stem>.instance.u32
struct StoredImage {
  RangeImage image;
  std::optional<PanopticLabel2D> labels;
};

void save_range_image(const std::filesystem::path& sidecar, const RangeImage& image,
                      const PanopticLabel2D* labels = nullptr);
StoredImage load_range_image(const std::filesystem::path& sidecar);

}  // namespace lps

#endif  // LPS_IMAGE_IO_HPP_
