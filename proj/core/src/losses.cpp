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

#include "drnet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "drnet/numerics/layout.hpp"

namespace drnet {

double LossReport::get(std::string_view name) const {
  for (const auto& [key, value] : components) {
    if (key == name) return value;
  }
  if (name == "total") return total;
  fail(ErrorCode::invalid_argument, "loss report has no component '" + std::string(name) + "'");
}

template <typename T>
LossValue<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred.shape(), target.shape(), "mse_loss");
  LossValue<T> out{0.0, Tensor<T>(pred.shape())};
  if (pred.numel() == 0) return out;
  const double count = static_cast<double>(pred.numel());
  const auto p = pred.data();
  const auto t = target.data();
  auto g = out.grad.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
    sum += d * d;
    g[i] = static_cast<T>(2.0 * d / count);
  }
  out.value = sum / count;
  return out;
}

namespace {

template <typename T>
void check_scores(const Tensor<T>& scores, const char* which) {
  for (T v : scores.data()) {
    require(v > T(0) && v < T(1), ErrorCode::invalid_argument,
            std::string("adversarial_losses: ") + which +
                " discriminator output must lie strictly inside (0, 1), got " +
                std::to_string(v));
  }
}

}  // namespace

template <typename T>
AdversarialLoss<T> adversarial_losses(const Tensor<T>& d_real, const Tensor<T>& d_fake) {
  check_scores(d_real, "real");
  check_scores(d_fake, "fake");
  AdversarialLoss<T> out;
  out.d_grad_real = Tensor<T>(d_real.shape());
  out.d_grad_fake = Tensor<T>(d_fake.shape());
  out.g_grad_fake = Tensor<T>(d_fake.shape());

  if (!d_real.empty()) {
    const double nr = static_cast<double>(d_real.numel());
    double sum = 0.0;
    for (std::size_t i = 0; i < d_real.numel(); ++i) {
      const double d = d_real[i];
      sum += std::log(std::max(d, kLogFloor));
      out.d_grad_real[i] = d > kLogFloor ? static_cast<T>(-1.0 / (nr * d)) : T(0);
    }
    out.discriminator -= sum / nr;
  }
  if (!d_fake.empty()) {
    const double nf = static_cast<double>(d_fake.numel());
    double sum_d = 0.0;
    double sum_g = 0.0;
    for (std::size_t i = 0; i < d_fake.numel(); ++i) {
      const double d = d_fake[i];
      const double one_minus = 1.0 - d;
      sum_d += std::log(std::max(one_minus, kLogFloor));
      sum_g += std::log(std::max(d, kLogFloor));
      out.d_grad_fake[i] = one_minus > kLogFloor ? static_cast<T>(1.0 / (nf * one_minus)) : T(0);
      out.g_grad_fake[i] = d > kLogFloor ? static_cast<T>(-1.0 / (nf * d)) : T(0);
    }
    out.discriminator -= sum_d / nf;
    out.generator = -sum_g / nf;
  }
  return out;
}

template <typename T>
TransmissionLoss<T> tp_total(const Tensor<T>& coarse, const Tensor<T>& fine,
                             const Tensor<T>& t_true, const SsimConfig& cfg) {
  require_same_shape(coarse.shape(), t_true.shape(), "tp_total (coarse)");
  require_same_shape(fine.shape(), t_true.shape(), "tp_total (fine)");
  auto cs = mse_loss(coarse, t_true);
  auto fs = mse_loss(fine, t_true);
  auto fs_ssim = ssim_loss(fine, t_true, cfg);
  TransmissionLoss<T> out;
  out.report.components = {{"cs_mse", cs.value}, {"fs_mse", fs.value}, {"fs_ssim", fs_ssim.value}};
  out.report.total = cs.value + fs.value + fs_ssim.value;
  out.grad_coarse = std::move(cs.grad);
  out.grad_fine = std::move(fs.grad);
  add_in_place(out.grad_fine, fs_ssim.grad);
  return out;
}

template <typename T>
DehazeLoss<T> d_total(const Tensor<T>& residual, const Tensor<T>& hazy, const Tensor<T>& clear,
                      const SsimConfig& cfg) {
  require_same_shape(residual.shape(), hazy.shape(), "d_total (residual vs hazy)");
  require_same_shape(hazy.shape(), clear.shape(), "d_total (hazy vs clear)");
  const Tensor<T> pred = add(residual, hazy);
  auto mse = mse_loss(pred, clear);
  auto ssim = ssim_loss(pred, clear, cfg);
  DehazeLoss<T> out;
  out.report.components = {{"d_mse", mse.value}, {"d_ssim", ssim.value}};
  out.report.total = mse.value + ssim.value;
  out.grad_residual = std::move(mse.grad);
  add_in_place(out.grad_residual, ssim.grad);
  return out;
}

template <typename T>
RefineLoss<T> rf_content(const Tensor<T>& refined, const Tensor<T>& dehazed_input,
                         const SsimConfig& cfg) {
  require_same_shape(refined.shape(), dehazed_input.shape(), "rf_total");
  auto mse = mse_loss(refined, dehazed_input);
  auto ssim = ssim_loss(refined, dehazed_input, cfg);
  RefineLoss<T> out;
  out.report.components = {{"rf_mse", mse.value}, {"rf_ssim", ssim.value}};
  out.report.total = mse.value + ssim.value;
  out.grad_refined = std::move(mse.grad);
  add_in_place(out.grad_refined, ssim.grad);
  return out;
}

template <typename T>
RefineLoss<T> rf_total(const Tensor<T>& refined, const Tensor<T>& dehazed_input,
                       const Tensor<T>& d_fake, const SsimConfig& cfg,
                       double adversarial_weight) {
  RefineLoss<T> out = rf_content(refined, dehazed_input, cfg);
  const auto adv = adversarial_losses(Tensor<T>{}, d_fake);
  out.report.components.emplace_back("gan", adv.generator);
  out.report.total = out.report.get("rf_mse") + out.report.get("rf_ssim") +
                     adversarial_weight * adv.generator;
  out.grad_d_fake = Tensor<T>(d_fake.shape());
  for (std::size_t i = 0; i < d_fake.numel(); ++i) {
    out.grad_d_fake[i] = static_cast<T>(adversarial_weight * adv.g_grad_fake[i]);
  }
  return out;
}

#define DRNET_INSTANTIATE_LOSSES(T)                                                           \
  template LossValue<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                         \
  template AdversarialLoss<T> adversarial_losses(const Tensor<T>&, const Tensor<T>&);         \
  template TransmissionLoss<T> tp_total(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                        const SsimConfig&);                                   \
  template DehazeLoss<T> d_total(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                 const SsimConfig&);                                          \
  template RefineLoss<T> rf_content(const Tensor<T>&, const Tensor<T>&, const SsimConfig&);   \
  template RefineLoss<T> rf_total(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                  const SsimConfig&, double);

DRNET_INSTANTIATE_LOSSES(float)
DRNET_INSTANTIATE_LOSSES(double)

#undef DRNET_INSTANTIATE_LOSSES

}  // namespace drnet
