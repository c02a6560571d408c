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

#ifndef LPS_TRAIN_HPP_
#define LPS_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <vector>

#include "lps/heads.hpp"

namespace lps {

// Class ids of the toy class map: three stuff classes and two thing classes.
enum ToyClass : std::uint32_t {
  kToyRoad = 0,
  kToyBuilding = 1,
  kToyVegetation = 2,
  kToyCar = 3,
  kToyPerson = 4,
  kToyIgnore = 5,
};
inline constexpr int kToyClasses = 5;

struct ToyScene {
  Tensor input;                       // (5, H, W) range image
  std::vector<std::uint32_t> target;  // H*W semantic ids
  ProximityGrid grid;
};

// Piecewise-constant synthetic range images whose regions sit on a 4-pixel
// lattice. Each class has its own range profile and intensity band.
std::vector<ToyScene> make_toy_scenes(int count, int height, int width, std::uint64_t seed);

struct TrainOptions {
  int steps = 500;
  double lr = 0.01;
  // Two-phase schedule: the first pseudo_steps steps cycle over pseudo_scenes.
  int pseudo_steps = 0;
};

struct TrainStep {
  int step = 0;
  double loss = 0.0;
  double pixel = 0.0;
  double lovasz = 0.0;
};

// Plain SGD, one scene per step in a fixed cyclic order.
std::vector<TrainStep> train_toy(SemanticNet<float>& net, const std::vector<ToyScene>& scenes,
                                 const TrainOptions& opt,
                                 const std::function<void(const TrainStep&)>& on_step = {},
                                 const std::vector<ToyScene>& pseudo_scenes = {});

// Mean pixel accuracy over the scenes.
double toy_accuracy(const SemanticNet<float>& net, const std::vector<ToyScene>& scenes);

}  // namespace lps

#endif  // LPS_TRAIN_HPP_
