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

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drnet/ssim.hpp"
#include "drnet/tensor.hpp"

namespace drnet {

/// Weight of the generator-side adversarial term in the refinement objective.
inline constexpr double kAdversarialWeight = 1e-3;

/// Clamp applied to log arguments in the adversarial losses.
inline constexpr double kLogFloor = 1e-7;

/// Named loss components and their weighted total.
struct LossReport {
  std::vector<std::pair<std::string, double>> components;
  double total = 0.0;

  double get(std::string_view name) const;
};

/// Mean of squared differences over every element, with gradient
/// 2 (pred - target) / count.
template <typename T>
LossValue<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Discriminator scores are batch tensors (N,1,1,1) strictly inside (0,1).
template <typename T>
struct AdversarialLoss {
  double discriminator = 0.0;  // -E[log D(real)] - E[log(1 - D(fake))]
  double generator = 0.0;      // -E[log D(fake)]
  Tensor<T> d_grad_real;       // d(discriminator)/d D(real)
  Tensor<T> d_grad_fake;       // d(discriminator)/d D(fake)
  Tensor<T> g_grad_fake;       // d(generator)/d D(fake)
};

/// The discriminator loss is the negated adversarial objective (D maximizes
/// it); the generator uses the non-saturating -log D(fake) form. Either tensor
/// may be empty when only the other side is needed.
template <typename T>
AdversarialLoss<T> adversarial_losses(const Tensor<T>& d_real, const Tensor<T>& d_fake);

template <typename T>
struct TransmissionLoss {
  LossReport report;  // cs_mse, fs_mse, fs_ssim
  Tensor<T> grad_coarse;
  Tensor<T> grad_fine;
};

/// Coarse MSE + fine MSE + fine SSIM loss against the ground-truth map.
template <typename T>
TransmissionLoss<T> tp_total(const Tensor<T>& coarse, const Tensor<T>& fine,
                             const Tensor<T>& t_true, const SsimConfig& cfg = {});

template <typename T>
struct DehazeLoss {
  LossReport report;  // d_mse, d_ssim
  Tensor<T> grad_residual;
};

/// MSE + SSIM loss of (residual + hazy) against the clear image.
template <typename T>
DehazeLoss<T> d_total(const Tensor<T>& residual, const Tensor<T>& hazy, const Tensor<T>& clear,
                      const SsimConfig& cfg = {});

template <typename T>
struct RefineLoss {
  LossReport report;  // rf_mse, rf_ssim, gan
  Tensor<T> grad_refined;
  Tensor<T> grad_d_fake;
};

/// Content terms compare the refined image to its own dehazed input; the
/// adversarial term enters with `adversarial_weight`.
template <typename T>
RefineLoss<T> rf_total(const Tensor<T>& refined, const Tensor<T>& dehazed_input,
                       const Tensor<T>& d_fake, const SsimConfig& cfg = {},
                       double adversarial_weight = kAdversarialWeight);

/// Content-only refinement objective (rf_mse + rf_ssim).
template <typename T>
RefineLoss<T> rf_content(const Tensor<T>& refined, const Tensor<T>& dehazed_input,
                         const SsimConfig& cfg = {});

}  // namespace drnet
