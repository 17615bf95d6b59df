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
#include <vector>

#include "drnet/tensor.hpp"

namespace drnet {

/// Interleaved samples, row-major, 1 (gray) or 3 (RGB) channels at 8 or 16 bits.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;

  int max_value() const { return bit_depth == 16 ? 65535 : 255; }
};

/// PNG (gray, gray+alpha, RGB, RGBA, palette; alpha is dropped) or binary
/// PGM/PPM (P5/P6). PNM files with maxval above 255 read as 16-bit.
Image read_image(const std::filesystem::path& path);

/// Format chosen by extension: .png, .pgm (1 channel) or .ppm (3 channels).
void write_image(const std::filesystem::path& path, const Image& image);

/// (1, channels, H, W) with values sample / max_value.
Tensor<float> image_to_tensor(const Image& image);

/// Clamps to [0, 1] and rounds to the nearest level. Accepts N = 1 only.
Image tensor_to_image(const Tensor<float>& tensor, int bit_depth = 8);

}  // namespace drnet
