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

#include "lps/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include "json.hpp"
#include "lps/error.hpp"
#include "lps/serialize.hpp"

namespace lps {
namespace {

using json = nlohmann::json;

[[noreturn]] void bad_key(const std::string& source, const std::string& key,
                          const std::string& message) {
  throw Error(ErrorKind::kValidation, source + ": " + key + ": " + message,
              {{"path", source}, {"key", key}});
}

const json& require(const json& obj, const char* field, const std::string& source,
                    const std::string& key) {
  if (!obj.is_object() || !obj.contains(field)) {
    bad_key(source, key + "." + field, "missing field");
  }
  return obj.at(field);
}

}  // namespace

PointCloud read_scan(std::string_view bytes) {
  if (bytes.size() % 16 != 0) {
    const std::size_t offset = bytes.size() / 16 * 16;
    throw Error(ErrorKind::kFormat,
                "scan truncated: partial point record at byte offset " + std::to_string(offset),
                {{"offset", std::to_string(offset)}});
  }
  PointCloud cloud;
  cloud.points.resize(bytes.size() / 16);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    Point& p = cloud.points[i];
    p.x = get_f32(bytes, 16 * i);
    p.y = get_f32(bytes, 16 * i + 4);
    p.z = get_f32(bytes, 16 * i + 8);
    p.intensity = get_f32(bytes, 16 * i + 12);
  }
  return cloud;
}

std::string write_scan(const PointCloud& cloud) {
  std::string out;
  out.reserve(cloud.size() * 16);
  for (const Point& p : cloud.points) {
    put_f32(out, p.x);
    put_f32(out, p.y);
    put_f32(out, p.z);
    put_f32(out, p.intensity);
  }
  return out;
}

PointCloud load_scan(const std::filesystem::path& path) {
  try {
    return read_scan(read_file(path));
  } catch (Error& e) {
    auto details = e.details();
    details["path"] = path.string();
    throw Error(e.kind(), path.string() + ": " + e.what(), details);
  }
}

void save_scan(const std::filesystem::path& path, const PointCloud& cloud) {
  write_file(path, write_scan(cloud));
}

LabelSet read_labels(std::string_view bytes) {
  if (bytes.size() % 4 != 0) {
    const std::size_t offset = bytes.size() / 4 * 4;
    throw Error(ErrorKind::kFormat,
                "label file truncated: partial record at byte offset " + std::to_string(offset),
                {{"offset", std::to_string(offset)}});
  }
  LabelSet labels;
  labels.resize(bytes.size() / 4);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint32_t v = get_u32(bytes, 4 * i);
    labels.semantic[i] = v & 0xFFFFu;
    labels.instance[i] = v >> 16;
  }
  return labels;
}

std::string write_labels(const LabelSet& labels) {
  if (labels.semantic.size() != labels.instance.size()) {
    throw Error(ErrorKind::kShape,
                "label set has " + std::to_string(labels.semantic.size()) + " semantic and " +
                    std::to_string(labels.instance.size()) + " instance ids");
  }
  std::string out;
  out.reserve(labels.size() * 4);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.semantic[i] > 0xFFFFu || labels.instance[i] > 0xFFFFu) {
      const bool sem = labels.semantic[i] > 0xFFFFu;
      throw Error(ErrorKind::kRange,
                  std::string(sem ? "semantic" : "instance") + " id " +
                      std::to_string(sem ? labels.semantic[i] : labels.instance[i]) +
                      " at point " + std::to_string(i) + " does not fit in 16 bits",
                  {{"index", std::to_string(i)}, {"field", sem ? "semantic" : "instance"}});
    }
    put_u32(out, pack_label(labels.semantic[i], labels.instance[i]));
  }
  return out;
}

LabelSet load_labels(const std::filesystem::path& path) {
  try {
    return read_labels(read_file(path));
  } catch (Error& e) {
    auto details = e.details();
    details["path"] = path.string();
    throw Error(e.kind(), path.string() + ": " + e.what(), details);
  }
}

void save_labels(const std::filesystem::path& path, const LabelSet& labels) {
  write_file(path, write_labels(labels));
}

ClassMap::ClassMap(std::string name, std::vector<ClassInfo> classes, int min_instance_points)
    : name_(std::move(name)), min_instance_points_(min_instance_points) {
  const std::string src = name_.empty() ? std::string("class map") : name_;
  if (min_instance_points < 0) {
    bad_key(src, "min_instance_points", "must be >= 0");
  }
  int ignore_count = 0;
  std::vector<ClassInfo> evaluated;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].ignore) {
      ++ignore_count;
      ignore_id_ = classes[i].learning_id;
      ignore_name_ = classes[i].name;
      ignore_raw_ids_ = classes[i].raw_ids;
    } else {
      evaluated.push_back(classes[i]);
    }
  }
  if (ignore_count != 1) {
    bad_key(src, "classes", "expected exactly one ignore entry, found " +
                                std::to_string(ignore_count));
  }
  std::sort(evaluated.begin(), evaluated.end(),
            [](const ClassInfo& a, const ClassInfo& b) { return a.learning_id < b.learning_id; });
  for (std::size_t i = 0; i < evaluated.size(); ++i) {
    if (evaluated[i].learning_id != i) {
      bad_key(src, "classes[" + evaluated[i].name + "].learning_id",
              "learning ids must be contiguous from 0; expected " + std::to_string(i) +
                  ", found " + std::to_string(evaluated[i].learning_id));
    }
  }
  if (ignore_id_ < evaluated.size()) {
    bad_key(src, "classes[" + ignore_name_ + "].learning_id",
            "ignore id collides with evaluated class " + evaluated[ignore_id_].name);
  }
  classes_ = std::move(evaluated);
  for (const auto& c : classes) {
    for (std::uint32_t raw : c.raw_ids) {
      if (!raw_to_learning_.emplace(raw, c.ignore ? ignore_id_ : c.learning_id).second) {
        bad_key(src, "classes[" + c.name + "].raw_ids",
                "raw id " + std::to_string(raw) + " listed twice");
      }
    }
  }
}

std::uint32_t ClassMap::raw_id_of(std::uint32_t id) const {
  const std::vector<std::uint32_t>* raw = nullptr;
  if (id == ignore_id_) {
    raw = &ignore_raw_ids_;
  } else if (id < classes_.size()) {
    raw = &classes_[id].raw_ids;
  }
  if (raw == nullptr || raw->empty()) {
    throw Error(ErrorKind::kData, "learning id " + std::to_string(id) + " has no raw id in " + name_,
                {{"learning_id", std::to_string(id)}});
  }
  return raw->front();
}

bool ClassMap::is_thing(std::uint32_t id) const {
  return id < classes_.size() && classes_[id].thing;
}

bool ClassMap::is_stuff(std::uint32_t id) const {
  return id < classes_.size() && !classes_[id].thing;
}

std::vector<std::uint32_t> ClassMap::thing_ids() const {
  std::vector<std::uint32_t> out;
  for (const auto& c : classes_) {
    if (c.thing) out.push_back(c.learning_id);
  }
  return out;
}

std::vector<std::uint32_t> ClassMap::stuff_ids() const {
  std::vector<std::uint32_t> out;
  for (const auto& c : classes_) {
    if (!c.thing) out.push_back(c.learning_id);
  }
  return out;
}

const std::string& ClassMap::class_name(std::uint32_t id) const {
  if (id == ignore_id_) return ignore_name_;
  if (id >= classes_.size()) {
    throw Error(ErrorKind::kRange, "unknown learning id " + std::to_string(id),
                {{"id", std::to_string(id)}});
  }
  return classes_[id].name;
}

std::uint32_t ClassMap::learning_id_of(std::uint32_t raw) const {
  auto it = raw_to_learning_.find(raw);
  if (it == raw_to_learning_.end()) {
    throw Error(ErrorKind::kData, "raw semantic id " + std::to_string(raw) + " not in class map",
                {{"id", std::to_string(raw)}});
  }
  return it->second;
}

ClassMap parse_class_map(std::string_view json_text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kValidation, source + ": invalid JSON: " + e.what(),
                {{"path", source}, {"byte", std::to_string(e.byte)}});
  }
  if (!doc.is_object()) bad_key(source, "$", "expected an object");
  std::string name = source;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) bad_key(source, "name", "expected a string");
    name = doc["name"].get<std::string>();
  }
  int min_points = 0;
  if (doc.contains("min_instance_points")) {
    const json& m = doc["min_instance_points"];
    if (!m.is_number_integer()) bad_key(source, "min_instance_points", "expected an integer");
    min_points = m.get<int>();
  }
  const json& arr = require(doc, "classes", source, "$");
  if (!arr.is_array()) bad_key(source, "classes", "expected an array");
  std::vector<ClassInfo> classes;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string key = "classes[" + std::to_string(i) + "]";
    const json& c = arr[i];
    if (!c.is_object()) bad_key(source, key, "expected an object");
    ClassInfo info;
    const json& n = require(c, "name", source, key);
    if (!n.is_string()) bad_key(source, key + ".name", "expected a string");
    info.name = n.get<std::string>();
    const json& raw = require(c, "raw_ids", source, key);
    if (!raw.is_array()) bad_key(source, key + ".raw_ids", "expected an array");
    for (std::size_t j = 0; j < raw.size(); ++j) {
      if (!raw[j].is_number_unsigned() || raw[j].get<std::uint64_t>() > 0xFFFFu) {
        bad_key(source, key + ".raw_ids[" + std::to_string(j) + "]",
                "expected an integer in [0, 65535]");
      }
      info.raw_ids.push_back(raw[j].get<std::uint32_t>());
    }
    const json& lid = require(c, "learning_id", source, key);
    if (!lid.is_number_unsigned() || lid.get<std::uint64_t>() > 0xFFFFu) {
      bad_key(source, key + ".learning_id", "expected an integer in [0, 65535]");
    }
    info.learning_id = lid.get<std::uint32_t>();
    const json& thing = require(c, "thing", source, key);
    if (!thing.is_boolean()) bad_key(source, key + ".thing", "expected a boolean");
    info.thing = thing.get<bool>();
    if (c.contains("ignore")) {
      if (!c["ignore"].is_boolean()) bad_key(source, key + ".ignore", "expected a boolean");
      info.ignore = c["ignore"].get<bool>();
    }
    classes.push_back(std::move(info));
  }
  return ClassMap(name, std::move(classes), min_points);
}

ClassMap load_class_map(const std::filesystem::path& path) {
  return parse_class_map(read_file(path), path.string());
}

LabelSet remap_and_filter(const LabelSet& labels, const ClassMap& map, const RemapOptions& opt) {
  if (labels.semantic.size() != labels.instance.size()) {
    throw Error(ErrorKind::kShape, "label set field lengths differ");
  }
  const std::size_t n = labels.size();
  LabelSet out;
  out.resize(n);
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t sem;
    try {
      sem = map.learning_id_of(labels.semantic[i]);
    } catch (Error& e) {
      auto details = e.details();
      details["index"] = std::to_string(i);
      throw Error(e.kind(), std::string(e.what()) + " (point " + std::to_string(i) + ")",
                  details);
    }
    out.semantic[i] = sem;
    out.instance[i] = map.is_thing(sem) ? labels.instance[i] : 0u;
    if (out.instance[i] != 0) ++counts[{sem, out.instance[i]}];
  }
  const auto limit = static_cast<std::size_t>(map.min_instance_points());
  for (std::size_t i = 0; i < n; ++i) {
    if (out.instance[i] == 0) continue;
    if (counts[{out.semantic[i], out.instance[i]}] < limit) {
      if (opt.ignore_small_instances) out.semantic[i] = map.ignore_id();
      out.instance[i] = 0;
    }
  }
  return out;
}

}  // namespace lps
