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

#include "lps/projection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lps/kernels.hpp"

namespace lps {
namespace {

int nearest_source(int dst, int in, int out) {
  const long long s = (2LL * dst + 1) * in / (2LL * out);
  return static_cast<int>(std::min<long long>(s, in - 1));
}

}  // namespace

void ProjectionConfig::validate() const {
  if (width < 1) {
    throw Error(ErrorKind::kValidation, "projection width must be >= 1",
                {{"key", "width"}, {"value", std::to_string(width)}});
  }
  if (rows < 1) {
    throw Error(ErrorKind::kValidation, "projection rows must be >= 1",
                {{"key", "rows"}, {"value", std::to_string(rows)}});
  }
  if (!(yaw_jump_threshold_deg > 0.0 && yaw_jump_threshold_deg < 360.0)) {
    throw Error(ErrorKind::kValidation, "yaw jump threshold must lie in (0, 360)",
                {{"key", "threshold_deg"}, {"value", std::to_string(yaw_jump_threshold_deg)}});
  }
}

double yaw_degrees(const Point& p) {
  double deg = std::atan2(static_cast<double>(p.y), static_cast<double>(p.x)) * 180.0 /
               std::numbers::pi;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg -= 360.0;
  return deg;
}

float point_range(const Point& p) {
  const double x = p.x, y = p.y, z = p.z;
  return static_cast<float>(std::sqrt(x * x + y * y + z * z));
}

std::vector<int> unfold_rows(const PointCloud& cloud, double threshold_deg, int max_rows) {
  std::vector<int> rows(cloud.size(), 0);
  int row = 0;
  for (std::size_t i = 1; i < cloud.size(); ++i) {
    const double d = yaw_degrees(cloud.points[i - 1]) - yaw_degrees(cloud.points[i]);
    if (std::abs(d) > threshold_deg) {
      ++row;
      if (row >= max_rows) {
        throw Error(ErrorKind::kData,
                    "scan unfolding produced more than " + std::to_string(max_rows) +
                        " rows at point " + std::to_string(i),
                    {{"index", std::to_string(i)}, {"rows", std::to_string(max_rows)}});
      }
    }
    rows[i] = row;
  }
  return rows;
}

int column_index(double phi, int width) {
  const double u = std::floor(0.5 * (1.0 - phi / std::numbers::pi) * width);
  if (!(u >= 0.0)) return 0;
  if (u > width - 1) return width - 1;
  return static_cast<int>(u);
}

RangeImage project(const PointCloud& cloud, const ProjectionConfig& config) {
  config.validate();
  const int h = config.rows, w = config.width;
  RangeImage img;
  img.channels = Tensor({kRangeImageChannels, h, w});
  img.valid.assign(static_cast<std::size_t>(h) * w, 0);
  img.point_of_pixel.assign(img.valid.size(), kNone);
  img.pixel_of_point.assign(cloud.size(), kNone);
  if (cloud.empty()) return img;

  const auto rows = unfold_rows(cloud, config.yaw_jump_threshold_deg, h);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud.points[i];
    const double phi = std::atan2(static_cast<double>(p.y), static_cast<double>(p.x));
    const int c = column_index(phi, w);
    const std::size_t px = img.pixel(rows[i], c);
    img.pixel_of_point[i] = static_cast<std::int32_t>(px);
    const float r = point_range(p);
    const std::int32_t cur = img.point_of_pixel[px];
    if (cur != kNone && img.channels.at(kRange, rows[i], c) <= r) continue;
    img.point_of_pixel[px] = static_cast<std::int32_t>(i);
    img.valid[px] = 1;
    img.channels.at(kRange, rows[i], c) = r;
    img.channels.at(kIntensity, rows[i], c) = p.intensity;
    img.channels.at(kX, rows[i], c) = p.x;
    img.channels.at(kY, rows[i], c) = p.y;
    img.channels.at(kZ, rows[i], c) = p.z;
  }
  return img;
}

PanopticLabel2D project_labels(const RangeImage& image, const LabelSet& labels,
                               std::uint32_t ignore_id) {
  if (labels.size() != image.pixel_of_point.size()) {
    throw Error(ErrorKind::kShape,
                "label count " + std::to_string(labels.size()) + " does not match point count " +
                    std::to_string(image.pixel_of_point.size()),
                {{"labels", std::to_string(labels.size())},
                 {"points", std::to_string(image.pixel_of_point.size())}});
  }
  PanopticLabel2D out(image.height(), image.width(), ignore_id, 0);
  for (std::size_t px = 0; px < out.size(); ++px) {
    const std::int32_t i = image.point_of_pixel[px];
    if (i == kNone) continue;
    out.semantic[px] = labels.semantic[static_cast<std::size_t>(i)];
    out.instance[px] = labels.instance[static_cast<std::size_t>(i)];
  }
  return out;
}

RangeImage resize_for_network(const RangeImage& image, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) {
    throw Error(ErrorKind::kShape,
                "resize target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                    " has a zero extent",
                {{"target", std::to_string(out_h) + "x" + std::to_string(out_w)}});
  }
  const int in_h = image.height(), in_w = image.width();
  if (in_h == out_h && in_w == out_w) return image;
  RangeImage out;
  out.channels = kernels::resize_bilinear_forward(image.channels, out_h, out_w);
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      // Guard against rounding below zero.
      float& v = out.channels.at(kRange, r, c);
      v = std::max(v, 0.0f);
    }
  }
  out.valid.assign(static_cast<std::size_t>(out_h) * out_w, 0);
  out.point_of_pixel.assign(out.valid.size(), kNone);
  for (int r = 0; r < out_h; ++r) {
    const int sr = nearest_source(r, in_h, out_h);
    for (int c = 0; c < out_w; ++c) {
      const int sc = nearest_source(c, in_w, out_w);
      const std::size_t dst = static_cast<std::size_t>(r) * out_w + c;
      out.valid[dst] = image.valid[image.pixel(sr, sc)];
      out.point_of_pixel[dst] = image.point_of_pixel[image.pixel(sr, sc)];
    }
  }
  out.pixel_of_point.resize(image.pixel_of_point.size());
  for (std::size_t i = 0; i < image.pixel_of_point.size(); ++i) {
    const std::int32_t px = image.pixel_of_point[i];
    if (px == kNone) {
      out.pixel_of_point[i] = kNone;
      continue;
    }
    const long long r = px / in_w, c = px % in_w;
    const long long nr = std::min<long long>((2 * r + 1) * out_h / (2LL * in_h), out_h - 1);
    const long long nc = std::min<long long>((2 * c + 1) * out_w / (2LL * in_w), out_w - 1);
    out.pixel_of_point[i] = static_cast<std::int32_t>(nr * out_w + nc);
  }
  return out;
}

PanopticLabel2D resize_labels_nearest(const PanopticLabel2D& labels, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) {
    throw Error(ErrorKind::kShape, "label resize target has a zero extent",
                {{"target", std::to_string(out_h) + "x" + std::to_string(out_w)}});
  }
  PanopticLabel2D out(out_h, out_w);
  for (int r = 0; r < out_h; ++r) {
    const int sr = nearest_source(r, labels.height, out_h);
    for (int c = 0; c < out_w; ++c) {
      const int sc = nearest_source(c, labels.width, out_w);
      out.semantic[out.index(r, c)] = labels.semantic[labels.index(sr, sc)];
      out.instance[out.index(r, c)] = labels.instance[labels.index(sr, sc)];
    }
  }
  return out;
}

LabelSet backproject_knn(const PanopticLabel2D& pred, const RangeImage& image,
                         const PointCloud& cloud, const KnnOptions& opt,
                         std::uint32_t ignore_id) {
  if (opt.window_h < 1 || opt.window_w < 1 || opt.window_h % 2 == 0 || opt.window_w % 2 == 0) {
    throw Error(ErrorKind::kValidation,
                "back-projection window must have odd positive extents, got " +
                    std::to_string(opt.window_h) + "x" + std::to_string(opt.window_w),
                {{"key", "window"}});
  }
  if (opt.k < 1 || opt.k > opt.window_h * opt.window_w) {
    throw Error(ErrorKind::kValidation,
                "k must lie in [1, window area], got " + std::to_string(opt.k),
                {{"key", "k"}, {"value", std::to_string(opt.k)}});
  }
  if (pred.height != image.height() || pred.width != image.width()) {
    throw Error(ErrorKind::kShape,
                "prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                    " does not match image " + std::to_string(image.height()) + "x" +
                    std::to_string(image.width()),
                {{"pred", std::to_string(pred.height) + "x" + std::to_string(pred.width)},
                 {"image", std::to_string(image.height()) + "x" + std::to_string(image.width())}});
  }
  if (cloud.size() != image.pixel_of_point.size()) {
    throw Error(ErrorKind::kShape,
                "cloud has " + std::to_string(cloud.size()) + " points, image maps " +
                    std::to_string(image.pixel_of_point.size()),
                {{"points", std::to_string(cloud.size())}});
  }
  const int h = image.height(), w = image.width();
  const int hh = opt.window_h / 2, hw = opt.window_w / 2;
  LabelSet out;
  out.resize(cloud.size());

  struct Candidate {
    float diff;
    int order;  // row-major position inside the window
    std::size_t pixel;
  };
  std::vector<Candidate> cands;
  cands.reserve(static_cast<std::size_t>(opt.window_h) * opt.window_w);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out.semantic[i] = ignore_id;
    out.instance[i] = 0;
    const std::int32_t px = image.pixel_of_point[i];
    if (px == kNone) continue;
    const int r0 = px / w, c0 = px % w;
    const float rp = point_range(cloud.points[i]);
    cands.clear();
    for (int dr = -hh; dr <= hh; ++dr) {
      for (int dc = -hw; dc <= hw; ++dc) {
        const int r = r0 + dr, c = c0 + dc;
        if (r < 0 || r >= h || c < 0 || c >= w || !image.is_valid(r, c)) continue;
        cands.push_back({std::abs(image.range(r, c) - rp), (dr + hh) * opt.window_w + (dc + hw),
                         image.pixel(r, c)});
      }
    }
    if (cands.empty()) continue;
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.diff != b.diff ? a.diff < b.diff : a.order < b.order;
    });
    const std::size_t n = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(opt.k));
    // Votes in candidate order; the first occurrence of a pair is its best rank.
    std::size_t best = 0;
    int best_votes = 0;
    for (std::size_t a = 0; a < n; ++a) {
      const std::size_t pa = cands[a].pixel;
      bool seen = false;
      for (std::size_t b = 0; b < a && !seen; ++b) {
        seen = pred.semantic[cands[b].pixel] == pred.semantic[pa] &&
               pred.instance[cands[b].pixel] == pred.instance[pa];
      }
      if (seen) continue;
      int votes = 0;
      for (std::size_t b = a; b < n; ++b) {
        votes += pred.semantic[cands[b].pixel] == pred.semantic[pa] &&
                 pred.instance[cands[b].pixel] == pred.instance[pa];
      }
      if (votes > best_votes) {
        best_votes = votes;
        best = pa;
      }
    }
    out.semantic[i] = pred.semantic[best];
    out.instance[i] = pred.instance[best];
  }
  return out;
}

}  // namespace lps
