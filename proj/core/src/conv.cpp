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

#include "drnet/numerics/conv.hpp"

#include <algorithm>

#include <Eigen/Core>

namespace drnet {
namespace {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Geometry {
  int in_c, in_h, in_w;
  int out_h, out_w;
  int k, pad, stride;
  Eigen::Index patch() const { return static_cast<Eigen::Index>(in_c) * k * k; }
  Eigen::Index pixels() const { return static_cast<Eigen::Index>(out_h) * out_w; }
};

template <typename T>
Geometry geometry(const Shape& input, const ConvLayer<T>& layer) {
  const Shape out = layer.output_shape(input);
  return {input.c, input.h, input.w, out.h, out.w, layer.kernel_size(), layer.padding(),
          layer.stride};
}

// Row r = (channel, ky, kx) of the unfolding holds that kernel tap's view of
// the zero-padded input at every output pixel.
template <typename T>
void im2col(const T* image, const Geometry& g, RowMajor<T>& col) {
  col.resize(g.patch(), g.pixels());
  T* dst = col.data();
  for (int ci = 0; ci < g.in_c; ++ci) {
    const T* src = image + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        for (int oy = 0; oy < g.out_h; ++oy, dst += g.out_w) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* row = src + static_cast<std::size_t>(iy) * g.in_w;
          if (g.stride == 1) {
            const int lo = std::clamp(g.pad - kx, 0, g.out_w);
            const int hi = std::clamp(g.in_w + g.pad - kx, lo, g.out_w);
            std::fill(dst, dst + lo, T(0));
            std::copy(row + lo - g.pad + kx, row + hi - g.pad + kx, dst + lo);
            std::fill(dst + hi, dst + g.out_w, T(0));
            continue;
          }
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            dst[ox] = (ix >= 0 && ix < g.in_w) ? row[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const RowMajor<T>& col, const Geometry& g, T* image) {
  const T* src = col.data();
  for (int ci = 0; ci < g.in_c; ++ci) {
    T* dst = image + static_cast<std::size_t>(ci) * g.in_h * g.in_w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx) {
        for (int oy = 0; oy < g.out_h; ++oy, src += g.out_w) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          T* row = dst + static_cast<std::size_t>(iy) * g.in_w;
          if (g.stride == 1) {
            const int lo = std::clamp(g.pad - kx, 0, g.out_w);
            const int hi = std::clamp(g.in_w + g.pad - kx, lo, g.out_w);
            T* base = row - g.pad + kx;
            for (int ox = lo; ox < hi; ++ox) base[ox] += src[ox];
            continue;
          }
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) row[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void check_input(const Tensor<T>& input, const ConvLayer<T>& layer) {
  require(input.c() == layer.in_channels(), ErrorCode::shape_mismatch,
          "conv2d: input has C=" + std::to_string(input.c()) + " channels but kernel expects " +
              std::to_string(layer.in_channels()));
  require(input.h() > 0 && input.w() > 0, ErrorCode::shape_mismatch,
          "conv2d: empty spatial extent " + input.shape().str());
}

}  // namespace

template <typename T>
ConvLayer<T> ConvLayer<T>::make(int in_channels, int out_channels, int kernel_size, int stride) {
  require(kernel_size > 0 && kernel_size % 2 == 1, ErrorCode::invalid_argument,
          "conv kernel size must be odd, got " + std::to_string(kernel_size));
  require(stride == 1 || stride == 2, ErrorCode::invalid_argument,
          "conv stride must be 1 or 2, got " + std::to_string(stride));
  require(in_channels > 0 && out_channels > 0, ErrorCode::invalid_argument,
          "conv channel counts must be positive");
  ConvLayer layer;
  layer.kernel = Tensor<T>(Shape{out_channels, in_channels, kernel_size, kernel_size});
  layer.bias = Tensor<T>(Shape{out_channels, 1, 1, 1});
  layer.stride = stride;
  return layer;
}

template <typename T>
Shape ConvLayer<T>::output_shape(const Shape& input) const {
  const int k = kernel_size();
  const int p = padding();
  return Shape{input.n, out_channels(), (input.h + 2 * p - k) / stride + 1,
               (input.w + 2 * p - k) / stride + 1};
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer) {
  check_input(input, layer);
  const Geometry g = geometry(input.shape(), layer);
  Tensor<T> out(layer.output_shape(input.shape()));
  const Eigen::Index m = layer.out_channels();
  Eigen::Map<const RowMajor<T>> weights(layer.kernel.data().data(), m, g.patch());

  RowMajor<T> col;
  const std::size_t in_stride = static_cast<std::size_t>(g.in_c) * g.in_h * g.in_w;
  const std::size_t out_stride = static_cast<std::size_t>(m) * g.pixels();
  for (int n = 0; n < input.n(); ++n) {
    im2col(input.data().data() + n * in_stride, g, col);
    Eigen::Map<RowMajor<T>> result(out.data().data() + n * out_stride, m, g.pixels());
    result.noalias() = weights * col;
    for (Eigen::Index oc = 0; oc < m; ++oc) {
      result.row(oc).array() += layer.bias[static_cast<std::size_t>(oc)];
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvLayer<T>& layer,
                             const Tensor<T>& grad_out) {
  check_input(input, layer);
  require_same_shape(grad_out.shape(), layer.output_shape(input.shape()), "conv2d_backward");
  const Geometry g = geometry(input.shape(), layer);
  const Eigen::Index m = layer.out_channels();
  Eigen::Map<const RowMajor<T>> weights(layer.kernel.data().data(), m, g.patch());

  ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(layer.kernel.shape()),
                     Tensor<T>(layer.bias.shape())};
  Eigen::Map<RowMajor<T>> grad_kernel(grads.kernel.data().data(), m, g.patch());

  RowMajor<T> col;
  RowMajor<T> grad_col;
  const std::size_t in_stride = static_cast<std::size_t>(g.in_c) * g.in_h * g.in_w;
  const std::size_t out_stride = static_cast<std::size_t>(m) * g.pixels();
  for (int n = 0; n < input.n(); ++n) {
    Eigen::Map<const RowMajor<T>> go(grad_out.data().data() + n * out_stride, m, g.pixels());
    im2col(input.data().data() + n * in_stride, g, col);
    grad_kernel.noalias() += go * col.transpose();
    grad_col.noalias() = weights.transpose() * go;
    col2im_add(grad_col, g, grads.input.data().data() + n * in_stride);
    for (Eigen::Index oc = 0; oc < m; ++oc) {
      grads.bias[static_cast<std::size_t>(oc)] += go.row(oc).sum();
    }
  }
  return grads;
}

template struct ConvLayer<float>;
template struct ConvLayer<double>;
template Tensor<float> conv2d_forward(const Tensor<float>&, const ConvLayer<float>&);
template Tensor<double> conv2d_forward(const Tensor<double>&, const ConvLayer<double>&);
template ConvGrads<float> conv2d_backward(const Tensor<float>&, const ConvLayer<float>&,
                                          const Tensor<float>&);
template ConvGrads<double> conv2d_backward(const Tensor<double>&, const ConvLayer<double>&,
                                           const Tensor<double>&);

}  // namespace drnet
