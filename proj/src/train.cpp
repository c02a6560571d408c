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

#include "lps/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lps/projection.hpp"

namespace lps {
namespace {

struct ClassLook {
  double range;      // base range in metres
  double intensity;  // base reflectance
};

constexpr ClassLook kLooks[kToyClasses] = {
    {6.0, 0.15},   // road: range also grows towards the horizon
    {32.0, 0.45},  // building
    {18.0, 0.75},  // vegetation
    {11.0, 0.9},   // car
    {8.0, 0.3},    // person
};

void fill_rect(std::vector<std::uint32_t>& map, int w, int r0, int c0, int r1, int c1,
               std::uint32_t cls) {
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) map[static_cast<std::size_t>(r) * w + c] = cls;
  }
}

}  // namespace

std::vector<ToyScene> make_toy_scenes(int count, int height, int width, std::uint64_t seed) {
  require_divisible_by_32({kRangeImageChannels, height, width}, "toy scene");
  Rng rng(seed);
  std::vector<ToyScene> scenes;
  const int cell = 4;
  const int gh = height / cell, gw = width / cell;
  for (int s = 0; s < count; ++s) {
    std::vector<std::uint32_t> map(static_cast<std::size_t>(height) * width, kToyRoad);
    // Background band: alternating building and vegetation blocks above the
    // horizon row.
    const int horizon = cell * rng.uniform_int(gh / 3, gh / 2);
    int c = 0;
    while (c < width) {
      const int span = cell * rng.uniform_int(2, std::max(2, gw / 4));
      const std::uint32_t cls = rng.uniform() < 0.5 ? kToyBuilding : kToyVegetation;
      fill_rect(map, width, 0, c, horizon, std::min(width, c + span), cls);
      c += span;
    }
    // Things standing on the road.
    const int cars = rng.uniform_int(1, 2);
    for (int i = 0; i < cars; ++i) {
      const int cw = cell * rng.uniform_int(3, 4), ch = cell * 2;
      const int c0 = cell * rng.uniform_int(0, gw - cw / cell);
      const int r0 = horizon - cell + cell * rng.uniform_int(0, 1);
      fill_rect(map, width, r0, c0, std::min(height, r0 + ch), c0 + cw, kToyCar);
    }
    const int people = rng.uniform_int(1, 2);
    for (int i = 0; i < people; ++i) {
      const int c0 = cell * rng.uniform_int(0, gw - 1);
      const int r0 = horizon - 2 * cell + cell * rng.uniform_int(0, 1);
      fill_rect(map, width, std::max(0, r0), c0, std::min(height, r0 + 3 * cell), c0 + cell,
                kToyPerson);
    }

    ToyScene scene;
    scene.input = Tensor({kRangeImageChannels, height, width});
    for (int r = 0; r < height; ++r) {
      const double pitch = (0.5 - static_cast<double>(r) / height) * 0.45;
      for (int col = 0; col < width; ++col) {
        const std::uint32_t cls = map[static_cast<std::size_t>(r) * width + col];
        const ClassLook& look = kLooks[cls];
        double range = look.range + rng.uniform(-0.3, 0.3);
        if (cls == kToyRoad) range += 0.8 * (height - r);
        const double yaw = std::numbers::pi * (1.0 - 2.0 * (col + 0.5) / width);
        scene.input.at(kRange, r, col) = static_cast<float>(range);
        scene.input.at(kIntensity, r, col) =
            static_cast<float>(look.intensity + rng.uniform(-0.05, 0.05));
        scene.input.at(kX, r, col) = static_cast<float>(range * std::cos(pitch) * std::cos(yaw));
        scene.input.at(kY, r, col) = static_cast<float>(range * std::cos(pitch) * std::sin(yaw));
        scene.input.at(kZ, r, col) = static_cast<float>(range * std::sin(pitch));
      }
    }
    scene.target = std::move(map);
    scene.grid = input_grid(scene.input, 5, 9);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

std::vector<TrainStep> train_toy(SemanticNet<float>& net, const std::vector<ToyScene>& scenes,
                                 const TrainOptions& opt,
                                 const std::function<void(const TrainStep&)>& on_step,
                                 const std::vector<ToyScene>& pseudo_scenes) {
  if (scenes.empty()) {
    throw Error(ErrorKind::kValidation, "train_toy: no scenes", {{"key", "scenes"}});
  }
  if (opt.steps < 0 || !(opt.lr > 0.0)) {
    throw Error(ErrorKind::kValidation, "train_toy: steps must be >= 0 and lr > 0",
                {{"key", opt.steps < 0 ? "steps" : "lr"}});
  }
  if (opt.pseudo_steps > 0 && pseudo_scenes.empty()) {
    throw Error(ErrorKind::kValidation, "train_toy: pseudo phase requested without scenes",
                {{"key", "pseudo_steps"}});
  }
  std::vector<TrainStep> history;
  history.reserve(static_cast<std::size_t>(opt.steps));
  auto& store = net.params();
  for (int step = 0; step < opt.steps; ++step) {
    const bool pseudo = step < opt.pseudo_steps;
    const auto& pool = pseudo ? pseudo_scenes : scenes;
    const int index = pseudo ? step : step - opt.pseudo_steps;
    const ToyScene& scene = pool[static_cast<std::size_t>(index) % pool.size()];
    store.reset_grads();
    Var<float> logits = net.forward(Var<float>::constant(scene.input), scene.grid);
    SemanticLoss<float> loss = semantic_loss(logits, scene.target, kToyIgnore);
    backward(loss.total);
    store.sgd_step(static_cast<float>(opt.lr));
    TrainStep rec{step, loss.total.value()[0], loss.pixel.value()[0], loss.lovasz.value()[0]};
    if (!std::isfinite(rec.loss)) {
      throw Error(ErrorKind::kNumeric, "training loss became non-finite",
                  {{"step", std::to_string(step)}});
    }
    history.push_back(rec);
    if (on_step) on_step(rec);
  }
  return history;
}

double toy_accuracy(const SemanticNet<float>& net, const std::vector<ToyScene>& scenes) {
  double sum = 0.0;
  for (const auto& s : scenes) {
    const Var<float> logits = net.forward(Var<float>::constant(s.input), s.grid);
    sum += pixel_accuracy(logits.value(), s.target, kToyIgnore);
  }
  return scenes.empty() ? 0.0 : sum / static_cast<double>(scenes.size());
}

}  // namespace lps
