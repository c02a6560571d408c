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

#include "lps/image_io.hpp"

#include <string>

#include "json.hpp"
#include "lps/serialize.hpp"

namespace lps {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kFormat = "lpskit-range-image";
constexpr int kVersion = 1;

fs::path sibling(const fs::path& sidecar, const std::string& suffix) {
  fs::path p = sidecar;
  p.replace_filename(sidecar.stem().string() + suffix);
  return p;
}

template <typename V>
std::string pack(const std::vector<V>& values) {
  std::string out;
  out.reserve(values.size() * 4);
  for (V v : values) {
    if constexpr (std::is_same_v<V, float>) {
      put_f32(out, v);
    } else {
      put_u32(out, static_cast<std::uint32_t>(v));
    }
  }
  return out;
}

std::string read_sized(const fs::path& path, std::size_t bytes) {
  std::string data = read_file(path);
  if (data.size() != bytes) {
    throw Error(ErrorKind::kFormat,
                path.string() + " holds " + std::to_string(data.size()) + " bytes, expected " +
                    std::to_string(bytes),
                {{"path", path.string()}, {"offset", std::to_string(data.size())}});
  }
  return data;
}

template <typename V>
std::vector<V> unpack(const fs::path& path, std::size_t count) {
  const std::string data = read_sized(path, count * 4);
  std::vector<V> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    if constexpr (std::is_same_v<V, float>) {
      out[i] = get_f32(data, 4 * i);
    } else {
      out[i] = static_cast<V>(get_u32(data, 4 * i));
    }
  }
  return out;
}

}  // namespace

void save_range_image(const fs::path& sidecar, const RangeImage& image,
                      const PanopticLabel2D* labels) {
  const int h = image.height();
  const int w = image.width();
  const auto name = [&](const std::string& suffix) {
    return sibling(sidecar, suffix).filename().string();
  };
  json j = {{"format", kFormat},
            {"version", kVersion},
            {"height", h},
            {"width", w},
            {"channels", {"range", "intensity", "x", "y", "z"}},
            {"data", name(".f32")},
            {"valid", name(".valid.u8")},
            {"mapping",
             {{"points", image.pixel_of_point.size()},
              {"pixel_of_point", name(".p2px.i32")},
              {"point_of_pixel", name(".px2p.i32")}}}};
  write_file(sibling(sidecar, ".f32"), pack(image.channels.storage()));
  write_file(sibling(sidecar, ".valid.u8"),
             std::string(image.valid.begin(), image.valid.end()));
  write_file(sibling(sidecar, ".p2px.i32"), pack(image.pixel_of_point));
  write_file(sibling(sidecar, ".px2p.i32"), pack(image.point_of_pixel));
  if (labels != nullptr) {
    if (labels->height != h || labels->width != w) {
      throw Error(ErrorKind::kShape, "label planes do not match the image extent",
                  {{"path", sidecar.string()}});
    }
    j["labels"] = {{"semantic", name(".semantic.u32")}, {"instance", name(".instance.u32")}};
    write_file(sibling(sidecar, ".semantic.u32"), pack(labels->semantic));
    write_file(sibling(sidecar, ".instance.u32"), pack(labels->instance));
  }
  write_file(sidecar, j.dump(2) + "\n");
}

StoredImage load_range_image(const fs::path& sidecar) {
  const std::string where = sidecar.string();
  json j;
  try {
    j = json::parse(read_file(sidecar));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kFormat, where + ": " + e.what(), {{"path", where}});
  }
  const auto bad = [&](const std::string& key, const std::string& what) {
    return Error(ErrorKind::kFormat, where + ": " + key + ": " + what,
                 {{"path", where}, {"key", key}});
  };
  if (!j.is_object() || j.value("format", "") != kFormat) {
    throw bad("format", std::string("expected \"") + kFormat + "\"");
  }
  if (j.value("version", 0) != kVersion) throw bad("version", "expected 1");
  StoredImage out;
  try {
    const int h = j.at("height").get<int>();
    const int w = j.at("width").get<int>();
    if (h <= 0 || w <= 0) throw bad("height", "extents must be positive");
    const std::size_t px = static_cast<std::size_t>(h) * w;
    const fs::path dir = sidecar.parent_path();
    const auto file = [&](const json& node, const char* key) {
      return dir / node.at(key).get<std::string>();
    };
    RangeImage& img = out.image;
    img.channels = Tensor({kRangeImageChannels, h, w},
                          unpack<float>(file(j, "data"), kRangeImageChannels * px));
    const std::string valid = read_sized(file(j, "valid"), px);
    img.valid.assign(valid.begin(), valid.end());
    const json& m = j.at("mapping");
    const std::size_t points = m.at("points").get<std::size_t>();
    img.pixel_of_point = unpack<std::int32_t>(file(m, "pixel_of_point"), points);
    img.point_of_pixel = unpack<std::int32_t>(file(m, "point_of_pixel"), px);
    for (std::size_t i = 0; i < points; ++i) {
      if (img.pixel_of_point[i] < 0 || static_cast<std::size_t>(img.pixel_of_point[i]) >= px) {
        throw bad("mapping.pixel_of_point", "point " + std::to_string(i) + " maps outside");
      }
    }
    for (std::size_t i = 0; i < px; ++i) {
      const std::int32_t p = img.point_of_pixel[i];
      if (p < kNone || p >= static_cast<std::int32_t>(points)) {
        throw bad("mapping.point_of_pixel", "pixel " + std::to_string(i) + " names no point");
      }
    }
    if (j.contains("labels")) {
      PanopticLabel2D l(h, w);
      l.semantic = unpack<std::uint32_t>(file(j["labels"], "semantic"), px);
      l.instance = unpack<std::uint32_t>(file(j["labels"], "instance"), px);
      out.labels = std::move(l);
    }
  } catch (const json::exception& e) {
    throw bad("sidecar", e.what());
  }
  return out;
}

}  // namespace lps
