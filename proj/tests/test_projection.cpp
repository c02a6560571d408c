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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lps/image_io.hpp"
#include "lps/projection.hpp"
#include "support.hpp"

namespace lps {
namespace {

Point at_yaw(double deg, double range = 10.0) {
  const double a = deg * std::numbers::pi / 180.0;
  return {static_cast<float>(range * std::cos(a)), static_cast<float>(range * std::sin(a)), 0.0f,
          0.0f};
}

ProjectionConfig config(int rows, int width) {
  ProjectionConfig c;
  c.rows = rows;
  c.width = width;
  return c;
}

TEST(Projection, YawInDegrees) {
  EXPECT_NEAR(yaw_degrees(at_yaw(30)), 30.0, 1e-5);
  EXPECT_NEAR(yaw_degrees(at_yaw(-30)), 330.0, 1e-5);
  EXPECT_NEAR(yaw_degrees({-1, 0, 0, 0}), 180.0, 1e-9);
}

TEST(Projection, ColumnIndex) {
  EXPECT_EQ(column_index(std::numbers::pi, 2048), 0);
  EXPECT_EQ(column_index(0.0, 2048), 1024);
  EXPECT_EQ(column_index(-std::numbers::pi, 2048), 2047);  // clamped from W
  int prev = 2048;
  for (double phi = -std::numbers::pi; phi <= std::numbers::pi; phi += 0.01) {
    const int c = column_index(phi, 2048);
    EXPECT_LE(c, prev);
    EXPECT_GE(c, 0);
    prev = c;
  }
}

TEST(Projection, UnfoldStartsRowsOnYawWrap) {
  PointCloud cloud;
  for (double y : {350.0, 200.0, 10.0, 355.0, 100.0, 5.0, 359.0}) cloud.points.push_back(at_yaw(y));
  EXPECT_EQ(unfold_rows(cloud, 310.0, 64), (std::vector<int>{0, 0, 0, 1, 1, 1, 2}));
  try {
    unfold_rows(cloud, 310.0, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kData);
    EXPECT_EQ(e.details().at("index"), "6");
  }
}

TEST(Projection, NearestPointWinsCollision) {
  PointCloud cloud;
  cloud.points = {at_yaw(90, 20.0), at_yaw(90, 5.0), at_yaw(90, 5.0)};
  cloud.points[1].intensity = 0.25f;
  const RangeImage img = project(cloud, config(4, 16));
  const std::size_t px = img.pixel_of_point[0];
  EXPECT_EQ(img.pixel_of_point[1], img.pixel_of_point[0]);
  EXPECT_EQ(img.point_of_pixel[px], 1);  // lower index wins the tie
  EXPECT_FLOAT_EQ(img.channels[px], 5.0f);
  EXPECT_FLOAT_EQ(img.channels.at(kIntensity, 0, static_cast<int>(px)), 0.25f);
  int valid = 0;
  for (auto v : img.valid) valid += v;
  EXPECT_EQ(valid, 1);
}

TEST(Projection, RangeChannelMatchesNorm) {
  Rng rng(20);
  const auto scan = testing::make_synthetic_scan({}, rng);
  const RangeImage img = project(scan.cloud, config(64, 256));
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      if (!img.is_valid(r, c)) continue;
      const double x = img.channels.at(kX, r, c), y = img.channels.at(kY, r, c),
                   z = img.channels.at(kZ, r, c);
      EXPECT_NEAR(img.range(r, c), std::sqrt(x * x + y * y + z * z), 1e-4 * img.range(r, c));
    }
  }
}

TEST(Projection, InvalidConfigRejected) {
  EXPECT_THROW(project({}, config(0, 16)), Error);
  ProjectionConfig c = config(4, 16);
  c.yaw_jump_threshold_deg = 400;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Projection, SyntheticScansAreCollisionFree) {
  Rng rng(21);
  for (int t = 0; t < 10; ++t) {
    testing::SyntheticScanOptions o;
    o.rows = rng.uniform_int(8, 32);
    o.width = 64 << rng.uniform_int(0, 2);
    const auto scan = testing::make_synthetic_scan(o, rng);
    const RangeImage img = project(scan.cloud, config(64, o.width));
    std::size_t valid = 0;
    for (auto v : img.valid) valid += v;
    EXPECT_EQ(valid, scan.cloud.size());
  }
}

TEST(Backproject, KOneReproducesLabels) {
  Rng rng(22);
  const ClassMap map = testing::toy_class_map();
  const auto scan = testing::make_synthetic_scan({}, rng);
  const LabelSet labels = remap_and_filter(scan.labels, map);
  const RangeImage img = project(scan.cloud, config(64, 256));
  const PanopticLabel2D planes = project_labels(img, labels, map.ignore_id());
  const LabelSet back = backproject_knn(planes, img, scan.cloud, {1, 5, 5}, map.ignore_id());
  EXPECT_EQ(back, labels);
}

TEST(Backproject, OcclusionsMostlyRecovered) {
  Rng rng(23);
  const ClassMap map = testing::toy_class_map();
  testing::SyntheticScanOptions o;
  o.occlusions = 20;
  const auto scan = testing::make_synthetic_scan(o, rng);
  const LabelSet labels = remap_and_filter(scan.labels, map);
  const RangeImage img = project(scan.cloud, config(64, 256));
  const PanopticLabel2D planes = project_labels(img, labels, map.ignore_id());
  const LabelSet back = backproject_knn(planes, img, scan.cloud, {}, map.ignore_id());
  std::size_t agree = 0, visible_disagree = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool ok = back.semantic[i] == labels.semantic[i] && back.instance[i] == labels.instance[i];
    agree += ok;
    if (!ok && !scan.occluded[i]) ++visible_disagree;
  }
  EXPECT_GE(static_cast<double>(agree) / labels.size(), 0.99);
  EXPECT_EQ(visible_disagree, 0u);
}

TEST(Backproject, EmptyNeighbourhoodGivesIgnore) {
  PointCloud cloud;
  cloud.points = {at_yaw(90)};
  const RangeImage img = project(cloud, config(1, 8));
  PanopticLabel2D pred(1, 8, 2, 0);
  RangeImage blind = img;
  blind.valid.assign(blind.valid.size(), 0);
  const LabelSet out = backproject_knn(pred, blind, cloud, {1, 3, 3}, 7);
  EXPECT_EQ(out.semantic[0], 7u);
  EXPECT_EQ(out.instance[0], 0u);
}

TEST(Backproject, Validation) {
  PointCloud cloud;
  cloud.points = {at_yaw(90)};
  const RangeImage img = project(cloud, config(1, 8));
  const PanopticLabel2D pred(1, 8);
  EXPECT_THROW(backproject_knn(pred, img, cloud, {1, 4, 5}, 5), Error);
  EXPECT_THROW(backproject_knn(pred, img, cloud, {26, 5, 5}, 5), Error);
  EXPECT_THROW(backproject_knn(PanopticLabel2D(2, 8), img, cloud, {}, 5), Error);
}

TEST(Resize, NearestLabelsAndNetworkImage) {
  PanopticLabel2D l(2, 4);
  for (std::size_t i = 0; i < l.size(); ++i) l.semantic[i] = static_cast<std::uint32_t>(i);
  const PanopticLabel2D up = resize_labels_nearest(l, 8, 4);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 4; ++c) EXPECT_EQ(up.semantic[r * 4 + c], l.semantic[(r / 4) * 4 + c]);
  }
  Rng rng(24);
  const auto scan = testing::make_synthetic_scan({}, rng);
  const RangeImage img = project(scan.cloud, config(64, 256));
  const RangeImage small = resize_for_network(img, 32, 64);
  EXPECT_EQ(small.channels.shape(), (Shape{5, 32, 64}));
  EXPECT_EQ(small.valid.size(), 32u * 64u);
}

TEST(ImageFile, RoundTrip) {
  Rng rng(25);
  const ClassMap map = testing::toy_class_map();
  const auto scan = testing::make_synthetic_scan({}, rng);
  const RangeImage img = project(scan.cloud, config(64, 256));
  const PanopticLabel2D planes = project_labels(img, remap_and_filter(scan.labels, map), 5);
  const auto dir = testing::scratch_dir("image-file");
  save_range_image(dir / "scan.json", img, &planes);
  const StoredImage back = load_range_image(dir / "scan.json");
  EXPECT_EQ(back.image.channels, img.channels);
  EXPECT_EQ(back.image.valid, img.valid);
  EXPECT_EQ(back.image.pixel_of_point, img.pixel_of_point);
  EXPECT_EQ(back.image.point_of_pixel, img.point_of_pixel);
  ASSERT_TRUE(back.labels.has_value());
  EXPECT_EQ(back.labels->semantic, planes.semantic);
  EXPECT_EQ(back.labels->instance, planes.instance);

  std::filesystem::resize_file(dir / "scan.f32", 12);
  try {
    load_range_image(dir / "scan.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    EXPECT_NE(e.details().at("path").find("scan.f32"), std::string::npos);
  }
}

}  // namespace
}  // namespace lps
