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

// Independent reference implementations used as test oracles. Nothing here
// shares code with the library kernels it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "drnet/numerics/conv.hpp"
#include "drnet/ssim.hpp"
#include "drnet/tensor.hpp"

namespace drnet::testing {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

/// Direct seven-deep loop cross-correlation with zero padding.
template <typename T>
Tensor<T> conv_reference(const Tensor<T>& x, const ConvLayer<T>& layer) {
  const int k = layer.kernel.h();
  const int pad = (k - 1) / 2;
  const int s = layer.stride;
  const int oh = (x.h() + 2 * pad - k) / s + 1;
  const int ow = (x.w() + 2 * pad - k) / s + 1;
  Tensor<T> out(Shape{x.n(), layer.kernel.n(), oh, ow});
  for (int n = 0; n < x.n(); ++n)
    for (int o = 0; o < layer.kernel.n(); ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double acc = static_cast<double>(layer.bias[static_cast<std::size_t>(o)]);
          for (int c = 0; c < x.c(); ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * s - pad + ky;
                const int ix = ox * s - pad + kx;
                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                acc += static_cast<double>(layer.kernel.at(o, c, ky, kx)) *
                       static_cast<double>(x.at(n, c, iy, ix));
              }
          out.at(n, o, oy, ox) = static_cast<T>(acc);
        }
  return out;
}

/// Per-pixel SSIM by explicit window summation: every pixel gathers its own
/// mirrored neighbourhood and computes mean, variance and covariance from
/// scratch.
inline Tensor<double> ssim_reference(const Tensor<double>& x, const Tensor<double>& y,
                                     const SsimConfig& cfg) {
  const int r = cfg.patch_size / 2;
  const auto mirror = [](int j, int n) {
    while (j < 0 || j >= n) j = j < 0 ? -j : 2 * (n - 1) - j;
    return j;
  };
  std::vector<double> weight(static_cast<std::size_t>(cfg.patch_size * cfg.patch_size));
  double total = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      double w = 1.0;
      if (cfg.window == SsimConfig::Window::gaussian) {
        const double s2 = cfg.gaussian_sigma * cfg.gaussian_sigma;
        w = std::exp(-(dx * dx + dy * dy) / (2.0 * s2));
      }
      weight[static_cast<std::size_t>((dy + r) * cfg.patch_size + dx + r)] = w;
      total += w;
    }
  for (double& w : weight) w /= total;

  Tensor<double> out(x.shape());
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int py = 0; py < x.h(); ++py)
        for (int px = 0; px < x.w(); ++px) {
          double mx = 0, my = 0;
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
              const double w = weight[static_cast<std::size_t>((dy + r) * cfg.patch_size + dx + r)];
              mx += w * x.at(n, c, mirror(py + dy, x.h()), mirror(px + dx, x.w()));
              my += w * y.at(n, c, mirror(py + dy, x.h()), mirror(px + dx, x.w()));
            }
          double vx = 0, vy = 0, cxy = 0;
          for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
              const double w = weight[static_cast<std::size_t>((dy + r) * cfg.patch_size + dx + r)];
              const double a = x.at(n, c, mirror(py + dy, x.h()), mirror(px + dx, x.w())) - mx;
              const double b = y.at(n, c, mirror(py + dy, x.h()), mirror(px + dx, x.w())) - my;
              vx += w * a * a;
              vy += w * b * b;
              cxy += w * a * b;
            }
          out.at(n, c, py, px) = (2 * mx * my + cfg.c1) / (mx * mx + my * my + cfg.c1) *
                                 (2 * cxy + cfg.c2) / (vx + vy + cfg.c2);
        }
  return out;
}

/// Central-difference gradient of f with respect to every entry of x.
inline std::vector<double> numeric_gradient(const std::function<double(const Tensor<double>&)>& f,
                                            Tensor<double> x, double h = 1e-6) {
  std::vector<double> g(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double plus = f(x);
    x[i] = saved - h;
    const double minus = f(x);
    x[i] = saved;
    g[i] = (plus - minus) / (2 * h);
  }
  return g;
}

inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

/// Dot product of y with a fixed weight tensor: a scalar probe whose gradient
/// with respect to y is exactly the weights.
inline double probe(const Tensor<double>& y, const Tensor<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.numel(); ++i) s += y[i] * w[i];
  return s;
}

}  // namespace drnet::testing
