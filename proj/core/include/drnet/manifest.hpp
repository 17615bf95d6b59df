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
#include <filesystem>
#include <string>
#include <vector>

#include "drnet/haze_model.hpp"

namespace drnet {

/// One rendered sample. Paths are relative to the manifest's directory.
struct ManifestRecord {
  std::string split;  // "train" or "val"
  int scene_id = 0;
  int sample_id = 0;
  std::uint64_t scene_seed = 0;
  std::string clear;
  std::string hazy;
  std::string transmission;
  std::string depth;
  double airlight = 0.0;
  double beta = 0.0;
  int width = 0;
  int height = 0;
};

struct Manifest {
  std::string source = "procedural";  // or "rgbd"
  std::string config;                 // canonical config text used to build it
  std::vector<ManifestRecord> records;
};

std::string manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const std::string& text, const std::string& origin = "manifest");

void save_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

/// Every referenced file exists with the recorded size and channel count, and
/// (A, beta) lie in the sampling ranges. Throws ErrorCode::manifest naming the
/// first offending record.
void validate_manifest(const Manifest& manifest, const std::filesystem::path& root);

/// Reads every sample into the train or validation split.
Dataset<float> load_dataset(const Manifest& manifest, const std::filesystem::path& root);

}  // namespace drnet
