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

// Shared fixtures and independent reference implementations for the tests
// and the acceptance runner.

#ifndef LPS_TESTS_SUPPORT_HPP_
#define LPS_TESTS_SUPPORT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lps/io.hpp"
#include "lps/metrics.hpp"
#include "lps/rng.hpp"

namespace lps::testing {

std::filesystem::path source_path(const std::string& relative);
ClassMap toy_class_map();

// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

// Synthetic scans laid out on a rows x width raster, one point per column at
// the column centre so that projection is collision free. Regions have well
// separated ranges: road near the sensor, boxes of things in the middle,
// blocks of building/vegetation far away.
struct SyntheticScanOptions {
  int rows = 16;
  int width = 256;
  double keep = 0.95;   // probability a raster cell holds a point
  int things = 6;
  int occlusions = 0;   // extra points hidden behind an existing point
};

struct SyntheticScan {
  PointCloud cloud;
  LabelSet labels;  // raw ids of the toy class map
  std::vector<std::uint8_t> occluded;  // per point
};

SyntheticScan make_synthetic_scan(const SyntheticScanOptions& opt, Rng& rng);

// Brute-force border band: pixel p is in the band when some boundary pixel q
// has max(|dr|, |dc|) <= width.
std::vector<std::uint8_t> brute_force_band(const PanopticLabel2D& gt, int width);

// Lovasz extension of the Jaccard loss by its integral form,
// integral over t in [0, 1] of |M_t| / |fg u M_t| with M_t = {i : e_i >= t}.
double lovasz_integral(const std::vector<double>& errors, const std::vector<std::uint8_t>& fg);

// Random small panoptic pair in learning ids of the toy class map; the
// prediction is a perturbed copy of the ground truth so matches are common.
struct LabelPair {
  LabelSet pred;
  LabelSet gt;
};
LabelPair random_label_pair(Rng& rng, const ClassMap& map, std::size_t n);

// Runs a shell command and returns its exit status; stdout and stderr go to
// the named files when given.
int run_command(const std::string& command, const std::string& out_file = {},
                const std::string& err_file = {});
std::string slurp(const std::filesystem::path& path);

}  // namespace lps::testing

#endif  // LPS_TESTS_SUPPORT_HPP_
