/*
   Copyright 2026 The drnet Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "drnet/tensor.hpp"

namespace drnet {

/// Sampling ranges used when synthesizing training pairs.
inline constexpr double kAirlightMin = 0.7;
inline constexpr double kAirlightMax = 1.0;
inline constexpr double kBetaMin = 0.6;
inline constexpr double kBetaMax = 1.6;

/// Lower clamp on transmission used by the analytic inverse only.
inline constexpr double kTransmissionFloor = 0.05;

/// Global atmospheric light (shared by all channels) and attenuation
/// coefficient for one hazy rendering.
struct HazeParams {
  double airlight = 1.0;
  double beta = 0.0;
};

template <typename T>
struct Scene {
  Tensor<T> clear;  // (1,3,H,W) in [0,1]
  Tensor<T> depth;  // (1,1,H,W) >= 0
};

template <typename T>
struct Sample {
  Tensor<T> hazy;          // (1,3,H,W)
  Tensor<T> clear;         // (1,3,H,W)
  Tensor<T> transmission;  // (1,1,H,W) in (0,1]
  Tensor<T> depth;         // (1,1,H,W)
  HazeParams params;
  int scene_id = 0;
  int sample_id = 0;
  std::uint64_t scene_seed = 0;
};

/// t = exp(-beta * depth), elementwise. Negative depth is an error.
template <typename T>
Tensor<T> transmission_from_depth(const Tensor<T>& depth, double beta);

/// I = J * t + A * (1 - t), with the single-channel t broadcast over J's channels.
template <typename T>
Tensor<T> synthesize_hazy(const Tensor<T>& clear, const Tensor<T>& transmission, double airlight);

/// Exact inverse of synthesize_hazy: J = (I - A(1 - t)) / max(t, t_floor),
/// clipped to [0, 1].
template <typename T>
Tensor<T> analytic_dehaze(const Tensor<T>& hazy, const Tensor<T>& transmission, double airlight,
                          double t_floor = kTransmissionFloor);

/// A ~ U[0.7, 1.0], beta ~ U[0.6, 1.6].
HazeParams sample_haze_params(std::mt19937_64& rng);

/// Procedural RGB-D scene: a sky/ground backdrop with a smooth depth ramp and
/// randomly placed textured rectangles, each on its own tilted depth plane.
/// Depth is min-max normalized to [0, 1].
template <typename T>
Scene<T> generate_scene(std::mt19937_64& rng, int height, int width);

/// Saturation and contrast boost mapping a procedural image toward the vivid
/// target domain used for refinement.
template <typename T>
Tensor<T> vivid_boost(const Tensor<T>& image, double saturation = 1.5, double contrast = 1.3);

struct DatasetSpec {
  std::uint64_t seed = 1;
  int train_scenes = 64;
  int val_scenes = 16;
  int samples_per_scene = 4;
  int height = 48;
  int width = 64;

  std::size_t train_samples() const {
    return static_cast<std::size_t>(train_scenes) * static_cast<std::size_t>(samples_per_scene);
  }
  std::size_t val_samples() const {
    return static_cast<std::size_t>(val_scenes) * static_cast<std::size_t>(samples_per_scene);
  }

  /// Desk-scale defaults: 64 + 16 scenes, 4 renderings each, 64x48.
  static DatasetSpec desk() { return {}; }
  /// Reference scale: 1299 + 150 scenes, 20 renderings each, 310x230.
  static DatasetSpec reference() { return {1, 1299, 150, 20, 230, 310}; }
};

template <typename T>
struct Dataset {
  std::vector<Sample<T>> train;
  std::vector<Sample<T>> validation;
};

/// Produces scene `index`; called with index in [0, train_scenes + val_scenes).
template <typename T>
using SceneSource = std::function<Scene<T>(int index, std::uint64_t scene_seed)>;

/// Renders samples_per_scene independent hazy versions of each scene. Scene i
/// uses its own generator seeded with seed + i, so the result does not depend
/// on generation order. Training scenes come first, then validation scenes.
template <typename T>
Dataset<T> build_dataset(const DatasetSpec& spec, const SceneSource<T>& source = {});

/// Renders one sample from a scene.
template <typename T>
Sample<T> render_sample(const Scene<T>& scene, const HazeParams& params);

}  // namespace drnet
