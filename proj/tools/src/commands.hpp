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

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "drnet/evaluation.hpp"
#include "drnet/haze_model.hpp"
#include "drnet/manifest.hpp"

namespace drnet::cli {

namespace fs = std::filesystem;

/// Reads an RGB image and a 16-bit depth map of the same size. Depth is
/// divided by its maximum so the farthest point maps to 1.
Scene<float> load_rgbd(const fs::path& image_path, const fs::path& depth_path);

struct SynthOptions {
  fs::path config;
  fs::path out;
  /// (image, depth) pairs replacing the procedural scenes, one per scene.
  std::vector<std::pair<fs::path, fs::path>> rgbd;
};

/// Writes train/ and val/ image folders and manifest.json under `out`.
Manifest cmd_synth(const SynthOptions& options);

struct TrainOptions {
  fs::path config;
  fs::path data;
  fs::path out;
  std::string mode = "dehaze";  // dehaze | refine | ablation
  std::optional<fs::path> resume;
};

/// Trains into a fresh run directory under `out` and returns its path.
fs::path cmd_train(const TrainOptions& options);

struct RunOptions {
  fs::path checkpoint;
  std::string stage = "dehaze";  // dehaze | refine
  std::vector<fs::path> inputs;
  fs::path out;
};

/// Writes <stem>_transmission.png, <stem>_dehazed.png and, for stage refine,
/// <stem>_refined.png per input. Returns the written paths.
std::vector<fs::path> cmd_run(const RunOptions& options);

struct EvalOptions {
  fs::path checkpoint;
  fs::path data;
  std::string split = "val";
  fs::path out;
};

/// Writes the text report to `out` and the per-image table to `out` + ".csv".
std::vector<EvalReport> cmd_eval(const EvalOptions& options);

}  // namespace drnet::cli
