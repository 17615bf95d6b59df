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

#include "drnet/numerics/layout.hpp"

#include <algorithm>

namespace drnet {

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (b.empty()) return a;
  if (a.empty()) return b;
  require(a.n() == b.n() && a.h() == b.h() && a.w() == b.w(), ErrorCode::shape_mismatch,
          "concat_channels: N/H/W must agree, got " + a.shape().str() + " and " +
              b.shape().str());
  Tensor<T> out(Shape{a.n(), a.c() + b.c(), a.h(), a.w()});
  const std::size_t sa = static_cast<std::size_t>(a.c()) * a.shape().plane();
  const std::size_t sb = static_cast<std::size_t>(b.c()) * b.shape().plane();
  auto dst = out.data().begin();
  for (int n = 0; n < a.n(); ++n) {
    dst = std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(n * sa), sa, dst);
    dst = std::copy_n(b.data().begin() + static_cast<std::ptrdiff_t>(n * sb), sb, dst);
  }
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int first_channels) {
  require(first_channels >= 0 && first_channels <= x.c(), ErrorCode::shape_mismatch,
          "split_channels: cannot take " + std::to_string(first_channels) + " channels from " +
              x.shape().str());
  Tensor<T> a(Shape{x.n(), first_channels, x.h(), x.w()});
  Tensor<T> b(Shape{x.n(), x.c() - first_channels, x.h(), x.w()});
  const std::size_t sa = static_cast<std::size_t>(a.c()) * x.shape().plane();
  const std::size_t sb = static_cast<std::size_t>(b.c()) * x.shape().plane();
  auto src = x.data().begin();
  for (int n = 0; n < x.n(); ++n) {
    std::copy_n(src, sa, a.data().begin() + static_cast<std::ptrdiff_t>(n * sa));
    src += static_cast<std::ptrdiff_t>(sa);
    std::copy_n(src, sb, b.data().begin() + static_cast<std::ptrdiff_t>(n * sb));
    src += static_cast<std::ptrdiff_t>(sb);
  }
  return {std::move(a), std::move(b)};
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T> out = a;
  add_in_place(out, b);
  return out;
}

template <typename T>
void add_in_place(Tensor<T>& acc, const Tensor<T>& x) {
  require_same_shape(acc.shape(), x.shape(), "add");
  auto d = acc.data();
  const auto s = x.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& x) {
  Tensor<T> out(Shape{x.n(), x.c(), 1, 1});
  const T inv = T(1) / static_cast<T>(x.shape().plane());
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      T sum = T(0);
      for (T v : x.plane(n, c)) sum += v;
      out.at(n, c, 0, 0) = sum * inv;
    }
  }
  return out;
}

template <typename T>
Tensor<T> global_average_pool_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
  require_same_shape(grad_out.shape(), Shape{input_shape.n, input_shape.c, 1, 1},
                     "global_average_pool_backward");
  Tensor<T> g(input_shape);
  const T inv = T(1) / static_cast<T>(input_shape.plane());
  for (int n = 0; n < input_shape.n; ++n) {
    for (int c = 0; c < input_shape.c; ++c) {
      const T v = grad_out.at(n, c, 0, 0) * inv;
      for (T& e : g.plane(n, c)) e = v;
    }
  }
  return g;
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  Tensor<T> out(x.shape());
  auto d = out.data();
  const auto s = x.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::clamp(s[i], lo, hi);
  return out;
}

#define DRNET_INSTANTIATE_LAYOUT(T)                                                   \
  template Tensor<T> concat_channels(const Tensor<T>&, const Tensor<T>&);             \
  template std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>&, int);     \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                         \
  template void add_in_place(Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> global_average_pool(const Tensor<T>&);                           \
  template Tensor<T> global_average_pool_backward(const Shape&, const Tensor<T>&);    \
  template Tensor<T> clamp(const Tensor<T>&, T, T);

DRNET_INSTANTIATE_LAYOUT(float)
DRNET_INSTANTIATE_LAYOUT(double)

#undef DRNET_INSTANTIATE_LAYOUT

}  // namespace drnet
