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

// Scan and label files in the SemanticKITTI layout, plus class maps.

#ifndef LPS_IO_HPP_
#define LPS_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lps {

struct Point {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity = 0.0f;

  friend bool operator==(const Point&, const Point&) = default;
};

struct PointCloud {
  std::vector<Point> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

// Per-point ids. Both fields hold 16-bit values on disk; wider values are
// rejected by write_labels.
struct LabelSet {
  std::vector<std::uint32_t> semantic;
  std::vector<std::uint32_t> instance;

  std::size_t size() const { return semantic.size(); }
  void resize(std::size_t n) {
    semantic.resize(n);
    instance.resize(n);
  }
  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

// Per-pixel (semantic, instance) map in row-major order.
struct PanopticLabel2D {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> semantic;
  std::vector<std::uint32_t> instance;

  PanopticLabel2D() = default;
  PanopticLabel2D(int h, int w, std::uint32_t sem = 0, std::uint32_t inst = 0)
      : height(h),
        width(w),
        semantic(static_cast<std::size_t>(h) * w, sem),
        instance(static_cast<std::size_t>(h) * w, inst) {}

  std::size_t size() const { return semantic.size(); }
  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * width + c; }
  friend bool operator==(const PanopticLabel2D&, const PanopticLabel2D&) = default;
};

// .bin: little-endian f32 quadruples (x, y, z, intensity).
PointCloud read_scan(std::string_view bytes);
std::string write_scan(const PointCloud& cloud);
PointCloud load_scan(const std::filesystem::path& path);
void save_scan(const std::filesystem::path& path, const PointCloud& cloud);

// .label: little-endian u32 with the semantic id in the low 16 bits and the
// instance id in the high 16 bits.
LabelSet read_labels(std::string_view bytes);
std::string write_labels(const LabelSet& labels);
LabelSet load_labels(const std::filesystem::path& path);
void save_labels(const std::filesystem::path& path, const LabelSet& labels);

inline std::uint32_t pack_label(std::uint32_t semantic, std::uint32_t instance) {
  return (instance << 16) | (semantic & 0xFFFFu);
}

struct ClassInfo {
  std::string name;
  std::vector<std::uint32_t> raw_ids;
  std::uint32_t learning_id = 0;
  bool thing = false;
  bool ignore = false;
};

class ClassMap {
 public:
  ClassMap() = default;
  // Validates contiguity of learning ids, a single ignore entry and unique
  // raw ids. Errors carry the offending key path.
  ClassMap(std::string name, std::vector<ClassInfo> classes, int min_instance_points);

  const std::string& name() const { return name_; }
  // Evaluated classes, indexed by learning id.
  const std::vector<ClassInfo>& classes() const { return classes_; }
  int num_classes() const { return static_cast<int>(classes_.size()); }
  std::uint32_t ignore_id() const { return ignore_id_; }
  int min_instance_points() const { return min_instance_points_; }
  void set_min_instance_points(int n) { min_instance_points_ = n; }

  bool is_thing(std::uint32_t learning_id) const;
  bool is_stuff(std::uint32_t learning_id) const;
  std::vector<std::uint32_t> thing_ids() const;
  std::vector<std::uint32_t> stuff_ids() const;
  const std::string& class_name(std::uint32_t learning_id) const;
  // Throws kData naming the id when it is not in the map.
  std::uint32_t learning_id_of(std::uint32_t raw_id) const;
  bool has_raw(std::uint32_t raw_id) const { return raw_to_learning_.count(raw_id) != 0; }
  // First raw id listed for a learning id (ignore included); kData when the
  // entry lists none.
  std::uint32_t raw_id_of(std::uint32_t learning_id) const;

 private:
  std::string name_;
  std::vector<ClassInfo> classes_;
  std::string ignore_name_ = "unlabeled";
  std::uint32_t ignore_id_ = 0;
  std::vector<std::uint32_t> ignore_raw_ids_;
  int min_instance_points_ = 0;
  std::unordered_map<std::uint32_t, std::uint32_t> raw_to_learning_;
};

ClassMap parse_class_map(std::string_view json_text, const std::string& source = "<memory>");
ClassMap load_class_map(const std::filesystem::path& path);

struct RemapOptions {
  // Send undersized instances to the ignore id instead of clearing only
  // their instance id.
  bool ignore_small_instances = false;
};

// Maps raw semantic ids to learning ids, clears instance ids on stuff and
// ignore points, and removes instances with fewer than
// map.min_instance_points() points.
LabelSet remap_and_filter(const LabelSet& labels, const ClassMap& map,
                          const RemapOptions& opt = {});

}  // namespace lps

#endif  // LPS_IO_HPP_
