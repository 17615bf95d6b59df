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

#include "drnet/tensor.hpp"

namespace drnet {

/// Window and stabilizing constants for per-pixel SSIM.
///
/// The defaults are a 13x13 uniform window with C1 = 0.02 and C2 = 0.03 used
/// as the constants themselves. classical() selects the widely published
/// variant (11x11 Gaussian window, sigma 1.5, C1 = 0.01^2, C2 = 0.03^2) for
/// comparison with external numbers.
struct SsimConfig {
  enum class Window { box, gaussian };

  int patch_size = 13;
  double c1 = 0.02;
  double c2 = 0.03;
  Window window = Window::box;
  double gaussian_sigma = 1.5;

  static SsimConfig classical();
  void validate() const;
};

template <typename T>
struct LossValue {
  double value = 0.0;
  Tensor<T> grad;  // d(value)/d(prediction)
};

/// Per-pixel SSIM of every (sample, channel) plane. Local statistics use the
/// configured window centred on each pixel with reflect (mirror without edge
/// repeat) borders, so the map has the input's shape. Population (1/n)
/// variances and covariances.
template <typename T>
Tensor<T> ssim_map(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg = {});

/// 1 - mean SSIM over every pixel of every plane, with the exact gradient with
/// respect to x through the local means, variances and covariance.
template <typename T>
LossValue<T> ssim_loss(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg = {});

}  // namespace drnet
