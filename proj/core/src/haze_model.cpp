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

#include "drnet/haze_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace drnet {

template <typename T>
Tensor<T> transmission_from_depth(const Tensor<T>& depth, double beta) {
  require(beta >= 0.0, ErrorCode::invalid_argument,
          "transmission_from_depth: beta must be >= 0, got " + std::to_string(beta));
  Tensor<T> t(depth.shape());
  const auto d = depth.data();
  auto out = t.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d[i] >= T(0)) || !std::isfinite(d[i])) {
      fail(ErrorCode::invalid_argument, "transmission_from_depth: depth must be finite and >= 0, "
                                        "found " + std::to_string(d[i]) + " at index " +
                                        std::to_string(i));
    }
    out[i] = static_cast<T>(std::exp(-beta * static_cast<double>(d[i])));
  }
  return t;
}

template <typename T>
Tensor<T> synthesize_hazy(const Tensor<T>& clear, const Tensor<T>& transmission, double airlight) {
  require(airlight > 0.0 && airlight <= 1.0, ErrorCode::invalid_argument,
          "synthesize_hazy: airlight must lie in (0, 1], got " + std::to_string(airlight));
  require(transmission.c() == 1 && transmission.n() == clear.n() &&
              transmission.h() == clear.h() && transmission.w() == clear.w(),
          ErrorCode::shape_mismatch,
          "synthesize_hazy: transmission " + transmission.shape().str() +
              " must be single-channel and match image " + clear.shape().str());
  for (T v : transmission.data()) {
    require(v > T(0) && v <= T(1), ErrorCode::invalid_argument,
            "synthesize_hazy: transmission must lie in (0, 1], found " + std::to_string(v));
  }
  const T a = static_cast<T>(airlight);
  Tensor<T> hazy(clear.shape());
  for (int n = 0; n < clear.n(); ++n) {
    const auto t = transmission.plane(n, 0);
    for (int c = 0; c < clear.c(); ++c) {
      const auto j = clear.plane(n, c);
      auto out = hazy.plane(n, c);
      for (std::size_t i = 0; i < j.size(); ++i) out[i] = j[i] * t[i] + a * (T(1) - t[i]);
    }
  }
  return hazy;
}

template <typename T>
Tensor<T> analytic_dehaze(const Tensor<T>& hazy, const Tensor<T>& transmission, double airlight,
                          double t_floor) {
  require(transmission.c() == 1 && transmission.n() == hazy.n() &&
              transmission.h() == hazy.h() && transmission.w() == hazy.w(),
          ErrorCode::shape_mismatch,
          "analytic_dehaze: transmission " + transmission.shape().str() +
              " must be single-channel and match image " + hazy.shape().str());
  const T a = static_cast<T>(airlight);
  const T floor = static_cast<T>(t_floor);
  Tensor<T> clear(hazy.shape());
  for (int n = 0; n < hazy.n(); ++n) {
    const auto t = transmission.plane(n, 0);
    for (int c = 0; c < hazy.c(); ++c) {
      const auto in = hazy.plane(n, c);
      auto out = clear.plane(n, c);
      for (std::size_t i = 0; i < in.size(); ++i) {
        const T j = (in[i] - a * (T(1) - t[i])) / std::max(t[i], floor);
        out[i] = std::clamp(j, T(0), T(1));
      }
    }
  }
  return clear;
}

HazeParams sample_haze_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> airlight(kAirlightMin, kAirlightMax);
  std::uniform_real_distribution<double> beta(kBetaMin, kBetaMax);
  HazeParams p;
  p.airlight = airlight(rng);
  p.beta = beta(rng);
  return p;
}

namespace {

struct Rect {
  int x0, y0, x1, y1;
  std::array<double, 3> color;
  std::array<double, 3> tint;  // color at the opposite corner of the gradient
  double depth, tilt_x, tilt_y;
  int pattern;  // 0 flat gradient, 1 stripes, 2 checker
  double period;
};

}  // namespace

template <typename T>
Scene<T> generate_scene(std::mt19937_64& rng, int height, int width) {
  require(height > 0 && width > 0, ErrorCode::invalid_argument,
          "generate_scene: size must be positive");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double H = height;
  const double W = width;

  Scene<T> scene{Tensor<T>(Shape{1, 3, height, width}), Tensor<T>(Shape{1, 1, height, width})};
  std::vector<double> depth(static_cast<std::size_t>(height) * width);
  std::vector<double> rgb(3 * depth.size());
  auto px = [&](int c, int y, int x) -> double& {
    return rgb[(static_cast<std::size_t>(c) * height + y) * width + x];
  };

  // Backdrop: sky above the horizon, ground below; depth shrinks toward the
  // bottom edge.
  const double horizon = (0.25 + 0.35 * u(rng)) * H;
  const std::array<double, 3> sky{0.55 + 0.3 * u(rng), 0.6 + 0.3 * u(rng), 0.7 + 0.3 * u(rng)};
  const std::array<double, 3> ground{0.2 + 0.5 * u(rng), 0.2 + 0.5 * u(rng), 0.1 + 0.4 * u(rng)};
  const double freq = 2.0 * std::numbers::pi * (1.0 + 4.0 * u(rng)) / W;
  const double phase = 2.0 * std::numbers::pi * u(rng);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * width + x;
      if (y < horizon) {
        const double s = y / std::max(horizon, 1.0);
        for (int c = 0; c < 3; ++c) px(c, y, x) = sky[c] * (1.0 - 0.2 * s);
        depth[i] = 1.0;
      } else {
        const double s = (y - horizon) / std::max(H - horizon, 1.0);
        const double texture = 0.08 * std::sin(freq * x + phase + 6.0 * s);
        for (int c = 0; c < 3; ++c) px(c, y, x) = ground[c] * (0.7 + 0.3 * s) + texture;
        depth[i] = 0.9 * (1.0 - s) + 0.05;
      }
    }
  }

  std::uniform_int_distribution<int> count_dist(3, 7);
  std::vector<Rect> rects(static_cast<std::size_t>(count_dist(rng)));
  for (auto& r : rects) {
    const int rw = std::max(2, static_cast<int>((0.1 + 0.4 * u(rng)) * W));
    const int rh = std::max(2, static_cast<int>((0.1 + 0.4 * u(rng)) * H));
    r.x0 = static_cast<int>(u(rng) * (W - rw));
    r.y0 = static_cast<int>(u(rng) * (H - rh));
    r.x1 = r.x0 + rw;
    r.y1 = r.y0 + rh;
    for (int c = 0; c < 3; ++c) {
      r.color[static_cast<std::size_t>(c)] = 0.05 + 0.9 * u(rng);
      r.tint[static_cast<std::size_t>(c)] = 0.05 + 0.9 * u(rng);
    }
    r.depth = 0.05 + 0.8 * u(rng);
    r.tilt_x = 0.2 * (u(rng) - 0.5);
    r.tilt_y = 0.2 * (u(rng) - 0.5);
    r.pattern = static_cast<int>(u(rng) * 3.0);
    r.period = 2.0 + 6.0 * u(rng);
  }
  // Painter's order: far rectangles first so near ones occlude them.
  std::stable_sort(rects.begin(), rects.end(),
                   [](const Rect& a, const Rect& b) { return a.depth > b.depth; });
  for (const auto& r : rects) {
    for (int y = r.y0; y < std::min(r.y1, height); ++y) {
      for (int x = r.x0; x < std::min(r.x1, width); ++x) {
        const double sx = (x - r.x0) / std::max(1.0, static_cast<double>(r.x1 - r.x0 - 1));
        const double sy = (y - r.y0) / std::max(1.0, static_cast<double>(r.y1 - r.y0 - 1));
        const double blend = 0.5 * (sx + sy);
        double shade = 1.0;
        if (r.pattern == 1) {
          shade = std::fmod(std::floor(x / r.period), 2.0) == 0.0 ? 1.0 : 0.7;
        } else if (r.pattern == 2) {
          const int cx = static_cast<int>(std::floor(x / r.period));
          const int cy = static_cast<int>(std::floor(y / r.period));
          shade = ((cx + cy) % 2 == 0) ? 1.0 : 0.75;
        }
        for (int c = 0; c < 3; ++c) {
          const auto ci = static_cast<std::size_t>(c);
          px(c, y, x) = shade * ((1.0 - blend) * r.color[ci] + blend * r.tint[ci]);
        }
        depth[static_cast<std::size_t>(y) * width + x] =
            std::max(0.0, r.depth + r.tilt_x * (x - r.x0) / W + r.tilt_y * (y - r.y0) / H);
      }
    }
  }

  const auto [lo, hi] = std::minmax_element(depth.begin(), depth.end());
  const double dmin = *lo;
  const double span = *hi - *lo;
  auto d_out = scene.depth.data();
  for (std::size_t i = 0; i < depth.size(); ++i) {
    d_out[i] = span > 0.0 ? static_cast<T>((depth[i] - dmin) / span) : T(0);
  }
  auto c_out = scene.clear.data();
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    c_out[i] = static_cast<T>(std::clamp(rgb[i], 0.0, 1.0));
  }
  return scene;
}

template <typename T>
Tensor<T> vivid_boost(const Tensor<T>& image, double saturation, double contrast) {
  require(image.c() == 3, ErrorCode::shape_mismatch,
          "vivid_boost: expects 3 channels, got " + image.shape().str());
  Tensor<T> out(image.shape());
  for (int n = 0; n < image.n(); ++n) {
    const auto r = image.plane(n, 0);
    const auto g = image.plane(n, 1);
    const auto b = image.plane(n, 2);
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double luma = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
      const std::array<double, 3> in{static_cast<double>(r[i]), static_cast<double>(g[i]),
                                     static_cast<double>(b[i])};
      for (int c = 0; c < 3; ++c) {
        const double s = luma + saturation * (in[static_cast<std::size_t>(c)] - luma);
        const double v = 0.5 + contrast * (s - 0.5);
        out.plane(n, c)[i] = static_cast<T>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

template <typename T>
Sample<T> render_sample(const Scene<T>& scene, const HazeParams& params) {
  Sample<T> s;
  s.clear = scene.clear;
  s.depth = scene.depth;
  s.transmission = transmission_from_depth(scene.depth, params.beta);
  s.hazy = synthesize_hazy(scene.clear, s.transmission, params.airlight);
  s.params = params;
  return s;
}

template <typename T>
Dataset<T> build_dataset(const DatasetSpec& spec, const SceneSource<T>& source) {
  require(spec.train_scenes >= 0 && spec.val_scenes >= 0 && spec.samples_per_scene >= 0,
          ErrorCode::invalid_argument, "build_dataset: counts must be non-negative");
  Dataset<T> data;
  const int total = spec.train_scenes + spec.val_scenes;
  for (int scene_id = 0; scene_id < total; ++scene_id) {
    const std::uint64_t scene_seed = spec.seed + static_cast<std::uint64_t>(scene_id);
    std::mt19937_64 rng(scene_seed);
    const Scene<T> scene =
        source ? source(scene_id, scene_seed) : generate_scene<T>(rng, spec.height, spec.width);
    auto& split = scene_id < spec.train_scenes ? data.train : data.validation;
    for (int k = 0; k < spec.samples_per_scene; ++k) {
      Sample<T> s = render_sample(scene, sample_haze_params(rng));
      s.scene_id = scene_id;
      s.sample_id = k;
      s.scene_seed = scene_seed;
      split.push_back(std::move(s));
    }
  }
  return data;
}

#define DRNET_INSTANTIATE_HAZE(T)                                                        \
  template Tensor<T> transmission_from_depth(const Tensor<T>&, double);                  \
  template Tensor<T> synthesize_hazy(const Tensor<T>&, const Tensor<T>&, double);        \
  template Tensor<T> analytic_dehaze(const Tensor<T>&, const Tensor<T>&, double, double); \
  template Scene<T> generate_scene(std::mt19937_64&, int, int);                          \
  template Tensor<T> vivid_boost(const Tensor<T>&, double, double);                      \
  template Sample<T> render_sample(const Scene<T>&, const HazeParams&);                  \
  template Dataset<T> build_dataset(const DatasetSpec&, const SceneSource<T>&);

DRNET_INSTANTIATE_HAZE(float)
DRNET_INSTANTIATE_HAZE(double)

#undef DRNET_INSTANTIATE_HAZE

}  // namespace drnet
