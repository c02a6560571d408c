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

#include "lps/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <utility>

#include "json.hpp"
#include "lps/parallel.hpp"
#include "lps/serialize.hpp"

namespace lps {
namespace {

using nlohmann::json;

struct Field {
  const char* name;
  double ControlParams::*real;
  int ControlParams::*count;
};

// Field order defines the grid expansion order.
constexpr Field kFields[] = {
    {"overlap_threshold", &ControlParams::overlap_threshold, nullptr},
    {"min_stuff_area", nullptr, &ControlParams::min_stuff_area},
    {"confidence_threshold", &ControlParams::confidence_threshold, nullptr},
    {"softmax_threshold", &ControlParams::softmax_threshold, nullptr},
    {"nms_iou", &ControlParams::nms_iou, nullptr},
    {"score_threshold", &ControlParams::score_threshold, nullptr},
    {"proposal_count", nullptr, &ControlParams::proposal_count},
};

const Field* find_field(const std::string& key) {
  for (const Field& f : kFields) {
    if (key == f.name) return &f;
  }
  return nullptr;
}

[[noreturn]] void bad_key(const std::string& source, const std::string& path,
                          const std::string& what) {
  throw Error(ErrorKind::kValidation, source + ": " + path + ": " + what,
              {{"source", source}, {"key", path}});
}

void set_field(ControlParams& p, const Field& f, double v, const std::string& source,
               const std::string& path) {
  if (f.real) {
    p.*(f.real) = v;
    return;
  }
  if (v != std::floor(v) || std::abs(v) > 1e9) bad_key(source, path, "expected an integer");
  p.*(f.count) = static_cast<int>(v);
}

double number_at(const json& j, const std::string& source, const std::string& path) {
  if (!j.is_number()) bad_key(source, path, "expected a number");
  return j.get<double>();
}

void apply_object(ControlParams& p, const json& obj, const std::string& source,
                  const std::string& prefix) {
  if (!obj.is_object()) bad_key(source, prefix, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    const Field* f = find_field(key);
    if (f == nullptr) bad_key(source, path, "unknown control parameter");
    set_field(p, *f, number_at(value, source, path), source, path);
  }
}

json params_json(const ControlParams& p) {
  json j = json::object();
  for (const Field& f : kFields) {
    if (f.real) {
      j[f.name] = p.*(f.real);
    } else {
      j[f.name] = p.*(f.count);
    }
  }
  return j;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

void ControlParams::validate() const {
  const std::pair<const char*, double> probs[] = {
      {"overlap_threshold", overlap_threshold},       {"confidence_threshold", confidence_threshold},
      {"softmax_threshold", softmax_threshold},       {"nms_iou", nms_iou},
      {"score_threshold", score_threshold},
  };
  for (const auto& [name, v] : probs) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw Error(ErrorKind::kValidation, std::string(name) + " must lie in [0, 1]",
                  {{"key", name}});
    }
  }
  if (min_stuff_area < 1) {
    throw Error(ErrorKind::kValidation, "min_stuff_area must be >= 1", {{"key", "min_stuff_area"}});
  }
  if (proposal_count < 1) {
    throw Error(ErrorKind::kValidation, "proposal_count must be >= 1", {{"key", "proposal_count"}});
  }
}

std::string ControlParams::to_json() const { return params_json(*this).dump(); }

ControlParams parse_control_params(std::string_view json_text, const std::string& source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kFormat, source + ": " + e.what(), {{"source", source}});
  }
  ControlParams p;
  apply_object(p, j, source, "");
  p.validate();
  return p;
}

std::string params_fingerprint(const ControlParams& params) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(params.to_json())));
  return buf;
}

void PLGConfig::validate() const {
  if (!(pq_cutoff >= 0.0 && pq_cutoff <= 1.0)) {
    throw Error(ErrorKind::kValidation, "pq_cutoff must lie in [0, 1]", {{"key", "pq_cutoff"}});
  }
  if (p_limit < 0) {
    throw Error(ErrorKind::kValidation, "p_limit must be >= 0", {{"key", "p_limit"}});
  }
}

ControlGrid::ControlGrid(std::vector<ControlParams> points) : explicit_(std::move(points)) {}

std::size_t ControlGrid::size() const {
  if (!explicit_.empty()) return explicit_.size();
  if (keys_.empty()) return 0;
  std::size_t n = 1;
  for (const auto& v : values_) n *= v.size();
  return n;
}

ControlParams ControlGrid::at(std::size_t index) const {
  if (index >= size()) {
    throw Error(ErrorKind::kRange,
                "grid index " + std::to_string(index) + " out of " + std::to_string(size()),
                {{"index", std::to_string(index)}});
  }
  if (!explicit_.empty()) return explicit_[index];
  ControlParams p = base_;
  for (std::size_t k = keys_.size(); k-- > 0;) {
    const auto& vals = values_[k];
    set_field(p, *find_field(keys_[k]), vals[index % vals.size()], "grid", keys_[k]);
    index /= vals.size();
  }
  return p;
}

ControlGrid parse_control_grid(std::string_view json_text, const std::string& source) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kFormat, source + ": " + e.what(), {{"source", source}});
  }
  if (!j.is_object()) bad_key(source, "", "expected an object");
  ControlGrid g;
  if (j.contains("base")) apply_object(g.base_, j["base"], source, "base");
  if (!j.contains("grid")) bad_key(source, "grid", "missing");
  const json& grid = j["grid"];
  if (!grid.is_object() || grid.empty()) bad_key(source, "grid", "expected a non-empty object");
  for (const auto& [key, value] : grid.items()) {
    if (find_field(key) == nullptr) bad_key(source, "grid." + key, "unknown control parameter");
    if (!value.is_array() || value.empty()) {
      bad_key(source, "grid." + key, "expected a non-empty list");
    }
  }
  for (const Field& f : kFields) {
    if (!grid.contains(f.name)) continue;
    std::vector<double> vals;
    const json& list = grid[f.name];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = std::string("grid.") + f.name + "[" + std::to_string(i) + "]";
      const double v = number_at(list[i], source, path);
      ControlParams probe = g.base_;
      set_field(probe, f, v, source, path);
      try {
        probe.validate();
      } catch (const Error& e) {
        bad_key(source, path, e.what());
      }
      vals.push_back(v);
    }
    g.keys_.push_back(f.name);
    g.values_.push_back(std::move(vals));
  }
  return g;
}

ControlGrid load_control_grid(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  return parse_control_grid(text, path.string());
}

GridSearchResult grid_search_control(const ControlEvaluator& evaluate, const ControlGrid& grid,
                                     const PLGConfig& cfg, int jobs) {
  cfg.validate();
  const std::size_t n = grid.size();
  if (n == 0) throw Error(ErrorKind::kValidation, "control grid is empty");
  GridSearchResult res;
  res.evaluations.resize(n);
  parallel_for(n, jobs, [&](std::size_t i) { res.evaluations[i] = evaluate(grid.at(i)); });

  bool found = false;
  double best_pq = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const ControlEval& e = res.evaluations[i];
    best_pq = std::max(best_pq, e.pq);
    if (e.pq < cfg.pq_cutoff || e.tp == 0) continue;
    const double ratio =
        (static_cast<double>(e.tp) - static_cast<double>(e.fp)) / static_cast<double>(e.tp);
    const bool better = !found || ratio > res.ratio || (ratio == res.ratio && e.pq > res.eval.pq);
    if (better) {
      found = true;
      res.index = i;
      res.eval = e;
      res.ratio = ratio;
    }
  }
  if (!found) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", best_pq);
    throw Error(ErrorKind::kInfeasible,
                "no grid point reaches PQ cutoff " + std::to_string(cfg.pq_cutoff) +
                    " with TP > 0; best PQ " + buf,
                {{"best_pq", buf}, {"pq_cutoff", std::to_string(cfg.pq_cutoff)}});
  }
  res.params = grid.at(res.index);
  return res;
}

std::size_t count_instances(const LabelSet& labels, std::uint32_t ignore_id) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.instance[i] == 0 || labels.semantic[i] == ignore_id) continue;
    ++counts[{labels.semantic[i], labels.instance[i]}];
  }
  return counts.size();
}

LabelSet filter_small_instances(const LabelSet& labels, int p_limit, std::uint32_t ignore_id) {
  if (p_limit < 0) {
    throw Error(ErrorKind::kValidation, "p_limit must be >= 0", {{"key", "p_limit"}});
  }
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels.instance[i] == 0 || labels.semantic[i] == ignore_id) continue;
    ++counts[{labels.semantic[i], labels.instance[i]}];
  }
  LabelSet out = labels;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.instance[i] == 0 || out.semantic[i] == ignore_id) continue;
    if (counts[{out.semantic[i], out.instance[i]}] < static_cast<std::size_t>(p_limit)) {
      out.semantic[i] = ignore_id;
      out.instance[i] = 0;
    }
  }
  return out;
}

std::string PseudoManifest::to_json() const {
  json entries_json = json::array();
  for (const ManifestEntry& e : entries) {
    json j = {{"scan", e.scan},
              {"label", e.label},
              {"points", e.points},
              {"instances_before", e.instances_before},
              {"instances_after", e.instances_after}};
    if (!e.error.empty()) j["error"] = e.error;
    entries_json.push_back(std::move(j));
  }
  json j = {{"format", "lpskit-pseudo-manifest"},
            {"version", 1},
            {"fingerprint", fingerprint},
            {"params", params_json(params)},
            {"pq_cutoff", config.pq_cutoff},
            {"p_limit", config.p_limit},
            {"entries", std::move(entries_json)}};
  return j.dump(2) + "\n";
}

PseudoManifest generate_pseudo_labels(const ScanRunner& runner,
                                      const std::vector<std::filesystem::path>& scans,
                                      const ControlParams& params, const PLGConfig& cfg,
                                      const ClassMap& map, const std::filesystem::path& out_dir,
                                      int jobs) {
  params.validate();
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw Error(ErrorKind::kData, "cannot create " + out_dir.string() + ": " + ec.message(),
                {{"path", out_dir.string()}});
  }
  PseudoManifest manifest;
  manifest.fingerprint = params_fingerprint(params);
  manifest.params = params;
  manifest.config = cfg;
  manifest.entries.resize(scans.size());
  parallel_for(scans.size(), jobs, [&](std::size_t i) {
    ManifestEntry& e = manifest.entries[i];
    e.scan = scans[i].string();
    try {
      const PointCloud cloud = load_scan(scans[i]);
      e.points = cloud.size();
      const LabelSet raw = runner(cloud, params);
      if (raw.size() != cloud.size()) {
        throw Error(ErrorKind::kData, "runner returned " + std::to_string(raw.size()) +
                                          " labels for " + std::to_string(cloud.size()) +
                                          " points");
      }
      e.instances_before = count_instances(raw, map.ignore_id());
      LabelSet kept = filter_small_instances(raw, cfg.p_limit, map.ignore_id());
      e.instances_after = count_instances(kept, map.ignore_id());
      for (auto& s : kept.semantic) s = map.raw_id_of(s);
      const std::filesystem::path out = out_dir / (scans[i].stem().string() + ".label");
      save_labels(out, kept);
      e.label = out.string();
    } catch (const Error& err) {
      e.error = err.what();
    }
  });
  write_file(out_dir / "manifest.json", manifest.to_json());
  return manifest;
}

}  // namespace lps
