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

// Regularised pseudo-label generation: a grid search over inference-time
// control parameters that maximises (TP - FP) / TP above a PQ floor, followed
// by removal of instances with too few points.

#ifndef LPS_PSEUDO_LABEL_HPP_
#define LPS_PSEUDO_LABEL_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "lps/io.hpp"

namespace lps {

struct ControlParams {
  double overlap_threshold = 0.5;     // o_t
  int min_stuff_area = 128;           // min_sa
  double confidence_threshold = 0.5;  // c_t
  double softmax_threshold = 0.0;     // pixels below become ignore
  double nms_iou = 0.5;
  double score_threshold = 0.05;
  int proposal_count = 100;

  void validate() const;
  // Keys are sorted, so the dump is canonical.
  std::string to_json() const;
  friend bool operator==(const ControlParams&, const ControlParams&) = default;
};

ControlParams parse_control_params(std::string_view json_text, const std::string& source);

// FNV-1a 64 of the canonical JSON, as 16 hex digits.
std::string params_fingerprint(const ControlParams& params);

struct PLGConfig {
  double pq_cutoff = 0.0;
  int p_limit = 0;

  void validate() const;
};

struct ControlEval {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  double pq = 0.0;
};

using ControlEvaluator = std::function<ControlEval(const ControlParams&)>;

// Per-parameter value lists; points are the Cartesian product in field order
// with the last key varying fastest. Points are materialised on demand.
class ControlGrid {
 public:
  ControlGrid() = default;
  explicit ControlGrid(std::vector<ControlParams> points);

  std::size_t size() const;
  ControlParams at(std::size_t index) const;

 private:
  friend ControlGrid parse_control_grid(std::string_view, const std::string&);
  std::vector<ControlParams> explicit_;
  std::vector<std::string> keys_;
  std::vector<std::vector<double>> values_;
  ControlParams base_;
};

// Accepts {"grid": {key: [values...]}, "base": {...}} where keys are the
// ControlParams field names. Errors carry the key path.
ControlGrid parse_control_grid(std::string_view json_text, const std::string& source);
ControlGrid load_control_grid(const std::filesystem::path& path);

struct GridSearchResult {
  std::size_t index = 0;
  ControlParams params;
  ControlEval eval;
  double ratio = 0.0;
  std::vector<ControlEval> evaluations;  // by grid index
};

// Feasible points have PQ >= cutoff and TP > 0. Returns the feasible point
// with the largest (TP - FP) / TP, breaking ties by higher PQ, then lower grid
// index. Throws kInfeasible (details carry the best PQ seen) otherwise.
// Evaluations run on up to `jobs` threads; the reduction is by grid index.
GridSearchResult grid_search_control(const ControlEvaluator& evaluate, const ControlGrid& grid,
                                     const PLGConfig& cfg, int jobs = 1);

// Number of distinct (semantic, instance) groups with a non-zero instance id.
std::size_t count_instances(const LabelSet& labels, std::uint32_t ignore_id);

// Instances with fewer than p_limit points get semantic = ignore_id and
// instance = 0. Labels hold learning ids.
LabelSet filter_small_instances(const LabelSet& labels, int p_limit, std::uint32_t ignore_id);

// Produces learning-id labels for one scan.
using ScanRunner = std::function<LabelSet(const PointCloud&, const ControlParams&)>;

struct ManifestEntry {
  std::string scan;
  std::string label;  // empty when the scan failed
  std::size_t points = 0;
  std::size_t instances_before = 0;
  std::size_t instances_after = 0;
  std::string error;  // empty on success
};

struct PseudoManifest {
  std::string fingerprint;
  ControlParams params;
  PLGConfig config;
  std::vector<ManifestEntry> entries;

  std::string to_json() const;
};

// Runs every scan, filters small instances, writes <stem>.label (raw ids via
// the class map) into out_dir, and writes manifest.json there. Scans that fail
// to load or run are recorded and skipped.
PseudoManifest generate_pseudo_labels(const ScanRunner& runner,
                                      const std::vector<std::filesystem::path>& scans,
                                      const ControlParams& params, const PLGConfig& cfg,
                                      const ClassMap& map, const std::filesystem::path& out_dir,
                                      int jobs = 1);

}  // namespace lps

#endif  // LPS_PSEUDO_LABEL_HPP_
