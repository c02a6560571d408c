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

#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <sys/wait.h>

namespace lps::testing {
namespace {

namespace fs = std::filesystem;

constexpr std::uint32_t kRoad = 0, kBuilding = 1, kVegetation = 2, kCar = 3, kPerson = 4;
constexpr std::uint32_t kUnlabeled = 255;

struct Box {
  int r0, c0, r1, c1;
  bool overlaps(const Box& o, int margin) const {
    return r0 < o.r1 + margin && o.r0 < r1 + margin && c0 < o.c1 + margin && o.c0 < c1 + margin;
  }
};

}  // namespace

fs::path source_path(const std::string& relative) { return fs::path(LPS_SOURCE_DIR) / relative; }

ClassMap toy_class_map() { return load_class_map(source_path("config/toy.json")); }

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lpskit-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SyntheticScan make_synthetic_scan(const SyntheticScanOptions& opt, Rng& rng) {
  const int h = opt.rows, w = opt.width;
  std::vector<std::uint32_t> sem(static_cast<std::size_t>(h) * w);
  std::vector<std::uint32_t> inst(sem.size(), 0);
  std::vector<double> range(sem.size());

  // Background: road on the lower third, alternating far blocks above.
  const int road_from = h - std::max(2, h / 3);
  const int block = std::max(8, w / 8);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (r >= road_from) {
        sem[i] = kRoad;
        range[i] = 3.0 + 3.0 * (h - 1 - r) / h;
      } else {
        const int b = c / block;
        sem[i] = (b % 2 == 0) ? kBuilding : kVegetation;
        range[i] = 35.0 + 10.0 * (b % 4);
      }
    }
  }
  // Things: non-touching boxes of at least 4x4 pixels.
  std::vector<Box> boxes;
  for (int attempt = 0; attempt < 50 * opt.things && static_cast<int>(boxes.size()) < opt.things;
       ++attempt) {
    const int bh = rng.uniform_int(4, std::max(4, h / 2));
    const int bw = rng.uniform_int(4, std::max(4, w / 10));
    if (bh > h || bw > w) break;
    const Box b{rng.uniform_int(0, h - bh), rng.uniform_int(0, w - bw), 0, 0};
    const Box box{b.r0, b.c0, b.r0 + bh, b.c0 + bw};
    if (std::any_of(boxes.begin(), boxes.end(), [&](const Box& o) { return box.overlaps(o, 1); })) {
      continue;
    }
    boxes.push_back(box);
    const std::uint32_t cls = rng.uniform() < 0.5 ? kCar : kPerson;
    const double rr = 10.0 + 2.0 * static_cast<double>(boxes.size());
    for (int r = box.r0; r < box.r1; ++r) {
      for (int c = box.c0; c < box.c1; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * w + c;
        sem[i] = cls;
        inst[i] = static_cast<std::uint32_t>(boxes.size());
        range[i] = rr;
      }
    }
  }

  // Which cells hold points; the first and last cell of each sweep are kept
  // so consecutive rows stay separated by a full wrap of the yaw.
  std::vector<int> order;
  for (int c = w / 2; c < w; ++c) order.push_back(c);
  for (int c = 0; c < w / 2; ++c) order.push_back(c);
  std::vector<std::uint8_t> kept(sem.size(), 0);
  std::vector<std::size_t> kept_cells;
  for (int r = 0; r < h; ++r) {
    for (std::size_t j = 0; j < order.size(); ++j) {
      const std::size_t i = static_cast<std::size_t>(r) * w + order[j];
      if (j == 0 || j + 1 == order.size() || rng.uniform() < opt.keep) {
        kept[i] = 1;
        kept_cells.push_back(i);
      }
    }
  }
  std::vector<std::uint8_t> hidden_behind(sem.size(), 0);
  for (int k = 0; k < opt.occlusions && !kept_cells.empty(); ++k) {
    hidden_behind[kept_cells[rng.uniform_int(0, static_cast<int>(kept_cells.size()) - 1)]] = 1;
  }

  SyntheticScan out;
  const auto emit = [&](int r, int c, double rho, std::uint32_t s, std::uint32_t id, bool occ) {
    const double theta = (2.0 - 26.0 * (r + 0.5) / h) * std::numbers::pi / 180.0;
    const double phi = std::numbers::pi * (1.0 - 2.0 * (c + 0.5) / w);
    Point p;
    p.x = static_cast<float>(rho * std::cos(theta) * std::cos(phi));
    p.y = static_cast<float>(rho * std::cos(theta) * std::sin(phi));
    p.z = static_cast<float>(rho * std::sin(theta));
    p.intensity = static_cast<float>(rng.uniform());
    out.cloud.points.push_back(p);
    out.labels.semantic.push_back(s);
    out.labels.instance.push_back(id);
    out.occluded.push_back(occ ? 1 : 0);
  };
  for (int r = 0; r < h; ++r) {
    for (int c : order) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (!kept[i]) continue;
      emit(r, c, range[i] + rng.uniform(-0.01, 0.01), sem[i], inst[i], false);
      if (hidden_behind[i]) {
        const std::uint32_t s = rng.uniform() < 0.5 ? kVegetation : kUnlabeled;
        emit(r, c, range[i] + rng.uniform(5.0, 10.0), s, 0, true);
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> brute_force_band(const PanopticLabel2D& gt, int width) {
  const int h = gt.height, w = gt.width;
  const auto key = [&](int r, int c) {
    const std::size_t i = static_cast<std::size_t>(r) * w + c;
    return std::make_pair(gt.semantic[i], gt.instance[i]);
  };
  std::vector<std::uint8_t> boundary(gt.size(), 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
      for (int k = 0; k < 4; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        if (rr >= 0 && rr < h && cc >= 0 && cc < w && key(rr, cc) != key(r, c)) {
          boundary[static_cast<std::size_t>(r) * w + c] = 1;
        }
      }
    }
  }
  std::vector<std::uint8_t> band(gt.size(), 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int qr = 0; qr < h; ++qr) {
        for (int qc = 0; qc < w; ++qc) {
          if (boundary[static_cast<std::size_t>(qr) * w + qc] &&
              std::max(std::abs(qr - r), std::abs(qc - c)) <= width) {
            band[static_cast<std::size_t>(r) * w + c] = 1;
          }
        }
      }
    }
  }
  return band;
}

double lovasz_integral(const std::vector<double>& errors, const std::vector<std::uint8_t>& fg) {
  std::vector<double> levels(errors.begin(), errors.end());
  levels.push_back(0.0);
  levels.push_back(1.0);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  const auto jaccard_loss = [&](double t) {
    std::size_t m = 0, uni = 0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
      const bool in_m = errors[i] >= t;
      m += in_m;
      uni += in_m || fg[i];
    }
    return uni == 0 ? 0.0 : static_cast<double>(m) / static_cast<double>(uni);
  };
  // M_t is constant on each (levels[k], levels[k + 1]]; sample the top end.
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    total += (levels[k + 1] - levels[k]) * jaccard_loss(levels[k + 1]);
  }
  return total;
}

LabelPair random_label_pair(Rng& rng, const ClassMap& map, std::size_t n) {
  const int classes = map.num_classes();
  const std::uint32_t ignore = map.ignore_id();
  LabelPair p;
  p.gt.resize(n);
  // Runs of identical labels make segments with realistic overlaps.
  std::size_t i = 0;
  while (i < n) {
    const std::size_t len = static_cast<std::size_t>(rng.uniform_int(1, 12));
    std::uint32_t s = static_cast<std::uint32_t>(rng.uniform_int(0, classes));
    if (s > ignore) s = ignore;
    const std::uint32_t id = map.is_thing(s) ? static_cast<std::uint32_t>(rng.uniform_int(0, 3)) : 0;
    for (std::size_t k = 0; k < len && i < n; ++k, ++i) {
      p.gt.semantic[i] = s;
      p.gt.instance[i] = id;
    }
  }
  p.pred = p.gt;
  const double noise = rng.uniform(0.0, 0.5);
  for (std::size_t k = 0; k < n; ++k) {
    if (rng.uniform() >= noise) continue;
    const std::uint32_t s = static_cast<std::uint32_t>(rng.uniform_int(0, classes));
    p.pred.semantic[k] = std::min(s, ignore);
    p.pred.instance[k] = map.is_thing(p.pred.semantic[k])
                             ? static_cast<std::uint32_t>(rng.uniform_int(0, 3))
                             : 0;
  }
  return p;
}

int run_command(const std::string& command, const std::string& out_file,
                const std::string& err_file) {
  std::string cmd = command;
  if (!out_file.empty()) cmd += " > '" + out_file + "'";
  if (!err_file.empty()) cmd += " 2> '" + err_file + "'";
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace lps::testing
