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

#include "lps/run_config.hpp"

#include <functional>
#include <map>

#include "json.hpp"
#include "lps/serialize.hpp"

namespace lps {
namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& source, const std::string& path, const std::string& what) {
  throw Error(ErrorKind::kValidation, source + ": " + path + ": " + what,
              {{"source", source}, {"key", path}});
}

using Handler = std::function<void(const json&, const std::string&)>;

void walk(const json& obj, const std::string& source, const std::string& prefix,
          const std::map<std::string, Handler>& handlers) {
  if (!obj.is_object()) bad(source, prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    auto it = handlers.find(key);
    if (it == handlers.end()) bad(source, path, "unknown key");
    it->second(value, path);
  }
}

Handler int_into(int* dst, const std::string& source) {
  return [dst, source](const json& v, const std::string& path) {
    if (!v.is_number_integer()) bad(source, path, "expected an integer");
    *dst = v.get<int>();
  };
}

Handler real_into(double* dst, const std::string& source) {
  return [dst, source](const json& v, const std::string& path) {
    if (!v.is_number()) bad(source, path, "expected a number");
    *dst = v.get<double>();
  };
}

// Runs validate() and rethrows its message under the given key path.
template <typename F>
void validated(const std::string& source, const std::string& path, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    bad(source, path, e.what());
  }
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const std::string& source,
                           const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kFormat, source + ": " + e.what(), {{"source", source}});
  }
  RunConfig rc;
  PipelineConfig& pc = rc.pipeline;
  walk(j, source, "",
       {{"version",
         [&](const json& v, const std::string& path) {
           if (!v.is_number_integer() || v.get<int>() != kRunConfigVersion) {
             bad(source, path, "unsupported version, expected " + std::to_string(kRunConfigVersion));
           }
         }},
        {"class_map",
         [&](const json& v, const std::string& path) {
           if (!v.is_string()) bad(source, path, "expected a path string");
           std::filesystem::path p = v.get<std::string>();
           rc.class_map = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
         }},
        {"seed",
         [&](const json& v, const std::string& path) {
           if (!v.is_number_unsigned()) bad(source, path, "expected a non-negative integer");
           rc.seed = v.get<std::uint64_t>();
         }},
        {"projection",
         [&](const json& v, const std::string& path) {
           walk(v, source, path,
                {{"width", int_into(&pc.projection.width, source)},
                 {"rows", int_into(&pc.projection.rows, source)},
                 {"yaw_jump_threshold_deg",
                  real_into(&pc.projection.yaw_jump_threshold_deg, source)}});
           validated(source, path, [&] { pc.projection.validate(); });
         }},
        {"network",
         [&](const json& v, const std::string& path) {
           walk(v, source, path,
                {{"height", int_into(&pc.net_height, source)},
                 {"width", int_into(&pc.net_width, source)}});
           validated(source, path, [&] {
             require_divisible_by_32({pc.net_height, pc.net_width}, "network extent");
           });
         }},
        {"knn",
         [&](const json& v, const std::string& path) {
           walk(v, source, path,
                {{"k", int_into(&pc.knn.k, source)},
                 {"window_h", int_into(&pc.knn.window_h, source)},
                 {"window_w", int_into(&pc.knn.window_w, source)}});
         }},
        {"fusion",
         [&](const json& v, const std::string& path) {
           walk(v, source, path,
                {{"confidence_threshold", real_into(&rc.fusion.confidence_threshold, source)},
                 {"overlap_threshold", real_into(&rc.fusion.overlap_threshold, source)},
                 {"min_stuff_area", int_into(&rc.fusion.min_stuff_area, source)}});
           validated(source, path, [&] { rc.fusion.validate(); });
         }},
        {"metrics", [&](const json& v, const std::string& path) {
           walk(v, source, path, {{"border_width", int_into(&rc.border_width, source)}});
           if (rc.border_width < 0) bad(source, path + ".border_width", "must be >= 0");
         }}});
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path), path.string(), path.parent_path());
}

}  // namespace lps
