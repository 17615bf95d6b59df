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
#include <string>
#include <string_view>

#include "drnet/haze_model.hpp"
#include "drnet/training.hpp"

namespace drnet {

/// Everything a command reads from a config file.
struct RunConfig {
  DatasetSpec dataset;
  TrainConfig train;
  int refine_pool_scenes = 32;    // held-out hazy scenes fed through the dehazer
  int refine_target_scenes = 64;  // vivid target images

  /// Reference scale: 1299/150 scenes, 20 renderings, 310x230, batches 16/8.
  static RunConfig reference();
};

/// Parses flat `key = value` lines; `#` starts a comment. `scale = desk|reference`
/// selects the base preset before the other keys apply, and `seed` sets both
/// the dataset and training seeds. Unknown keys are reported together.
RunConfig parse_config(std::string_view text, const std::string& origin = "config");
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text listing every key; parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& config);

/// Hex digest of the canonical training settings.
std::string config_hash(const TrainConfig& config);

}  // namespace drnet
