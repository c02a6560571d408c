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

// Shared JSON configuration for the command-line tool.
//
//   {
//     "version": 1,
//     "class_map": "config/semantic_kitti.json",
//     "seed": 0,
//     "projection": {"width": 2048, "rows": 64, "yaw_jump_threshold_deg": 310},
//     "network": {"height": 32, "width": 64},
//     "knn": {"k": 5, "window_h": 5, "window_w": 5},
//     "fusion": {"confidence_threshold": 0.5, "overlap_threshold": 0.5,
//                "min_stuff_area": 128},
//     "metrics": {"border_width": 2}
//   }
//
// Every key is optional. A relative class_map path resolves against the
// config file's directory.

#ifndef LPS_RUN_CONFIG_HPP_
#define LPS_RUN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "lps/fusion.hpp"
#include "lps/pipeline.hpp"

namespace lps {

inline constexpr int kRunConfigVersion = 1;

struct RunConfig {
  std::optional<std::filesystem::path> class_map;
  std::uint64_t seed = 0;
  PipelineConfig pipeline;
  FusionConfig fusion;
  int border_width = 2;
};

// Unknown keys and wrongly typed values raise kValidation naming the key path.
RunConfig parse_run_config(std::string_view json_text, const std::string& source,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace lps

#endif  // LPS_RUN_CONFIG_HPP_
