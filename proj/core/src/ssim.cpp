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

#include "drnet/ssim.hpp"

#include <cmath>
#include <vector>

namespace drnet {

SsimConfig SsimConfig::classical() {
  SsimConfig cfg;
  cfg.patch_size = 11;
  cfg.c1 = 0.01 * 0.01;
  cfg.c2 = 0.03 * 0.03;
  cfg.window = Window::gaussian;
  return cfg;
}

void SsimConfig::validate() const {
  require(patch_size >= 3 && patch_size % 2 == 1, ErrorCode::invalid_argument,
          "ssim: patch size must be odd and >= 3, got " + std::to_string(patch_size));
  require(c1 > 0.0 && c2 > 0.0, ErrorCode::invalid_argument, "ssim: C1 and C2 must be positive");
  require(window == Window::box || gaussian_sigma > 0.0, ErrorCode::invalid_argument,
          "ssim: gaussian sigma must be positive");
}

namespace {

std::vector<double> window_weights(const SsimConfig& cfg) {
  const int r = cfg.patch_size / 2;
  std::vector<double> w(static_cast<std::size_t>(cfg.patch_size));
  double sum = 0.0;
  for (int o = -r; o <= r; ++o) {
    const double v = cfg.window == SsimConfig::Window::box
                         ? 1.0
                         : std::exp(-0.5 * o * o / (cfg.gaussian_sigma * cfg.gaussian_sigma));
    w[static_cast<std::size_t>(o + r)] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

inline int reflect(int j, int n) {
  if (j < 0) return -j;
  if (j >= n) return 2 * (n - 1) - j;
  return j;
}

// Separable weighted window over an h x w plane. The 2-D weights are the
// outer product of `weights` with itself.
class WindowFilter {
 public:
  WindowFilter(std::vector<double> weights, int h, int w)
      : weights_(std::move(weights)), r_(static_cast<int>(weights_.size()) / 2), h_(h), w_(w),
        tmp_(static_cast<std::size_t>(h) * w) {}

  void apply(const std::vector<double>& in, std::vector<double>& out) {
    out.assign(in.size(), 0.0);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        double acc = 0.0;
        for (int o = -r_; o <= r_; ++o) acc += weight(o) * in[idx(y, reflect(x + o, w_))];
        tmp_[idx(y, x)] = acc;
      }
    }
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        double acc = 0.0;
        for (int o = -r_; o <= r_; ++o) acc += weight(o) * tmp_[idx(reflect(y + o, h_), x)];
        out[idx(y, x)] = acc;
      }
    }
  }

  // Transpose of apply(): vertical adjoint first, then horizontal.
  void apply_adjoint(const std::vector<double>& in, std::vector<double>& out) {
    std::fill(tmp_.begin(), tmp_.end(), 0.0);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const double v = in[idx(y, x)];
        for (int o = -r_; o <= r_; ++o) tmp_[idx(reflect(y + o, h_), x)] += weight(o) * v;
      }
    }
    out.assign(in.size(), 0.0);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const double v = tmp_[idx(y, x)];
        for (int o = -r_; o <= r_; ++o) out[idx(y, reflect(x + o, w_))] += weight(o) * v;
      }
    }
  }

 private:
  double weight(int o) const { return weights_[static_cast<std::size_t>(o + r_)]; }
  std::size_t idx(int y, int x) const { return static_cast<std::size_t>(y) * w_ + x; }

  std::vector<double> weights_;
  int r_, h_, w_;
  std::vector<double> tmp_;
};

// Local moments of one plane pair.
struct PlaneStats {
  std::vector<double> mu_x, mu_y, e_xx, e_yy, e_xy;
};

template <typename T>
void check_inputs(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg) {
  cfg.validate();
  require_same_shape(x.shape(), y.shape(), "ssim");
  require(x.h() >= cfg.patch_size && x.w() >= cfg.patch_size, ErrorCode::invalid_argument,
          "ssim: image " + std::to_string(x.h()) + "x" + std::to_string(x.w()) +
              " is smaller than the " + std::to_string(cfg.patch_size) + "x" +
              std::to_string(cfg.patch_size) + " patch");
}

template <typename T>
PlaneStats plane_stats(std::span<const T> xs, std::span<const T> ys, WindowFilter& filter) {
  std::vector<double> x(xs.begin(), xs.end());
  std::vector<double> y(ys.begin(), ys.end());
  std::vector<double> prod(x.size());
  PlaneStats s;
  filter.apply(x, s.mu_x);
  filter.apply(y, s.mu_y);
  for (std::size_t i = 0; i < x.size(); ++i) prod[i] = x[i] * x[i];
  filter.apply(prod, s.e_xx);
  for (std::size_t i = 0; i < x.size(); ++i) prod[i] = y[i] * y[i];
  filter.apply(prod, s.e_yy);
  for (std::size_t i = 0; i < x.size(); ++i) prod[i] = x[i] * y[i];
  filter.apply(prod, s.e_xy);
  return s;
}

struct PixelTerms {
  double a1, b1, a2, b2, ssim;
};

inline PixelTerms pixel_terms(const PlaneStats& s, std::size_t i, double c1, double c2) {
  const double mx = s.mu_x[i];
  const double my = s.mu_y[i];
  const double vx = s.e_xx[i] - mx * mx;
  const double vy = s.e_yy[i] - my * my;
  const double cov = s.e_xy[i] - mx * my;
  PixelTerms p;
  p.a1 = 2.0 * mx * my + c1;
  p.b1 = mx * mx + my * my + c1;
  p.a2 = 2.0 * cov + c2;
  p.b2 = vx + vy + c2;
  p.ssim = (p.a1 * p.a2) / (p.b1 * p.b2);
  return p;
}

}  // namespace

template <typename T>
Tensor<T> ssim_map(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg) {
  check_inputs(x, y, cfg);
  Tensor<T> out(x.shape());
  WindowFilter filter(window_weights(cfg), x.h(), x.w());
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const PlaneStats s = plane_stats(x.plane(n, c), y.plane(n, c), filter);
      auto dst = out.plane(n, c);
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = static_cast<T>(pixel_terms(s, i, cfg.c1, cfg.c2).ssim);
      }
    }
  }
  return out;
}

template <typename T>
LossValue<T> ssim_loss(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg) {
  check_inputs(x, y, cfg);
  LossValue<T> result{0.0, Tensor<T>(x.shape())};
  WindowFilter filter(window_weights(cfg), x.h(), x.w());
  const double scale = 1.0 / static_cast<double>(x.numel());
  const std::size_t m = x.shape().plane();

  std::vector<double> d_mu(m), d_exx(m), d_exy(m);
  std::vector<double> g_mu, g_exx, g_exy;
  double ssim_sum = 0.0;
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      const auto xs = x.plane(n, c);
      const auto ys = y.plane(n, c);
      const PlaneStats s = plane_stats(xs, ys, filter);
      for (std::size_t i = 0; i < m; ++i) {
        const PixelTerms p = pixel_terms(s, i, cfg.c1, cfg.c2);
        ssim_sum += p.ssim;
        const double mx = s.mu_x[i];
        const double my = s.mu_y[i];
        const double inv = 1.0 / (p.b1 * p.b2);
        const double ds_dmu = 2.0 * my * p.a2 * inv - 2.0 * mx * p.ssim / p.b1;
        const double ds_dvar = -p.ssim / p.b2;
        const double ds_dcov = 2.0 * p.a1 * inv;
        // loss = 1 - scale * sum(ssim); chain through var = E[xx] - mu^2 and
        // cov = E[xy] - mu_x mu_y.
        d_mu[i] = -scale * (ds_dmu - 2.0 * mx * ds_dvar - my * ds_dcov);
        d_exx[i] = -scale * ds_dvar;
        d_exy[i] = -scale * ds_dcov;
      }
      filter.apply_adjoint(d_mu, g_mu);
      filter.apply_adjoint(d_exx, g_exx);
      filter.apply_adjoint(d_exy, g_exy);
      auto g = result.grad.plane(n, c);
      for (std::size_t i = 0; i < m; ++i) {
        const double xv = xs[i];
        const double yv = ys[i];
        g[i] = static_cast<T>(g_mu[i] + 2.0 * xv * g_exx[i] + yv * g_exy[i]);
      }
    }
  }
  result.value = 1.0 - scale * ssim_sum;
  return result;
}

template Tensor<float> ssim_map(const Tensor<float>&, const Tensor<float>&, const SsimConfig&);
template Tensor<double> ssim_map(const Tensor<double>&, const Tensor<double>&, const SsimConfig&);
template LossValue<float> ssim_loss(const Tensor<float>&, const Tensor<float>&,
                                    const SsimConfig&);
template LossValue<double> ssim_loss(const Tensor<double>&, const Tensor<double>&,
                                     const SsimConfig&);

}  // namespace drnet
