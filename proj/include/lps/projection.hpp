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

// Scan unfolding into a 5-channel range image and kNN back-projection of 2D
// predictions onto the original points.

#ifndef LPS_PROJECTION_HPP_
#define LPS_PROJECTION_HPP_

#include <cstdint>
#include <vector>

#include "lps/io.hpp"
#include "lps/tensor.hpp"

namespace lps {

struct ProjectionConfig {
  int width = 2048;
  int rows = 64;
  double yaw_jump_threshold_deg = 310.0;

  void validate() const;
};

enum RangeChannel { kRange = 0, kIntensity = 1, kX = 2, kY = 3, kZ = 4 };
inline constexpr int kRangeImageChannels = 5;
inline constexpr std::int32_t kNone = -1;

struct RangeImage {
  Tensor channels;                          // (5, H, W): range, intensity, x, y, z
  std::vector<std::uint8_t> valid;          // H*W
  std::vector<std::int32_t> pixel_of_point;  // flat pixel index per point
  std::vector<std::int32_t> point_of_pixel;  // winning point per pixel or kNone

  int height() const { return channels.empty() ? 0 : channels.dim(1); }
  int width() const { return channels.empty() ? 0 : channels.dim(2); }
  std::size_t pixel(int r, int c) const { return static_cast<std::size_t>(r) * width() + c; }
  bool is_valid(int r, int c) const { return valid[pixel(r, c)] != 0; }
  float range(int r, int c) const { return channels.at(kRange, r, c); }
};

// Yaw atan2(y, x) in degrees, mapped to [0, 360).
double yaw_degrees(const Point& p);
float point_range(const Point& p);

// Row per point: starts at 0 and increments whenever consecutive yaws differ
// by more than the threshold in absolute value. Throws kData naming the point
// that would open row max_rows.
std::vector<int> unfold_rows(const PointCloud& cloud, double threshold_deg, int max_rows);

// floor(0.5 * (1 - phi / pi) * W) clamped into [0, W - 1].
int column_index(double phi, int width);

// On collision the nearer point (lower index on equal range) fills the pixel.
RangeImage project(const PointCloud& cloud, const ProjectionConfig& config);

// Labels of the winning point per pixel; empty pixels get (ignore_id, 0).
PanopticLabel2D project_labels(const RangeImage& image, const LabelSet& labels,
                               std::uint32_t ignore_id);

// Bilinear on channels, nearest on validity and the point bookkeeping.
RangeImage resize_for_network(const RangeImage& image, int out_h, int out_w);
PanopticLabel2D resize_labels_nearest(const PanopticLabel2D& labels, int out_h, int out_w);

struct KnnOptions {
  int k = 5;
  int window_h = 5;
  int window_w = 5;
};

// Each point takes the (semantic, instance) pair voted by the k valid pixels
// in the window around its own pixel whose range is closest to its own. Ties
// in the vote go to the pair holding the closest candidate; points without a
// candidate get (ignore_id, 0).
LabelSet backproject_knn(const PanopticLabel2D& pred, const RangeImage& image,
                         const PointCloud& cloud, const KnnOptions& opt,
                         std::uint32_t ignore_id);

}  // namespace lps

#endif  // LPS_PROJECTION_HPP_
