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

#include "drnet/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace drnet {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::io: return "io";
    case ErrorCode::unsupported_format: return "unsupported_format";
    case ErrorCode::config: return "config";
    case ErrorCode::manifest: return "manifest";
    case ErrorCode::checkpoint_corrupt: return "checkpoint_corrupt";
    case ErrorCode::checkpoint_truncated: return "checkpoint_truncated";
    case ErrorCode::checkpoint_version: return "checkpoint_version";
    case ErrorCode::checkpoint_shape: return "checkpoint_shape";
    case ErrorCode::checkpoint_missing: return "checkpoint_missing";
    case ErrorCode::diverged: return "diverged";
    case ErrorCode::gradient_check: return "gradient_check";
  }
  return "unknown";
}

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a == b) return;
  const char* dim = a.n != b.n ? "N" : a.c != b.c ? "C" : a.h != b.h ? "H" : "W";
  fail(ErrorCode::shape_mismatch, std::string(what) + ": dimension " + dim + " differs, " +
                                      a.str() + " vs " + b.str());
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(shape) {
  require(shape.n >= 0 && shape.c >= 0 && shape.h >= 0 && shape.w >= 0,
          ErrorCode::invalid_argument, "negative tensor dimension " + shape.str());
  data_.assign(shape.numel(), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values)
    : shape_(shape), data_(values.begin(), values.end()) {
  require(data_.size() == shape.numel(), ErrorCode::shape_mismatch,
          "tensor data length " + std::to_string(data_.size()) + " does not match shape " +
              shape.str());
}

template <typename T>
std::span<T> Tensor<T>::plane(int n, int c) {
  return std::span<T>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
}

template <typename T>
std::span<const T> Tensor<T>::plane(int n, int c) const {
  return std::span<const T>(data_).subspan(offset(n, c, 0, 0), shape_.plane());
}

template <typename T>
std::span<T> Tensor<T>::grad() {
  if (grad_.size() != data_.size()) grad_.assign(data_.size(), T(0));
  return grad_;
}

template <typename T>
void Tensor<T>::zero_grad() {
  grad_.assign(data_.size(), T(0));
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> Tensor<T>::slice(int first, int count) const {
  require(first >= 0 && count >= 0 && first + count <= shape_.n, ErrorCode::invalid_argument,
          "slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
              ") out of range for batch " + std::to_string(shape_.n));
  const std::size_t per = static_cast<std::size_t>(shape_.c) * shape_.plane();
  Shape s = shape_;
  s.n = count;
  Tensor<T> out(s);
  std::copy(data_.begin() + static_cast<std::ptrdiff_t>(first * per),
            data_.begin() + static_cast<std::ptrdiff_t>((first + count) * per), out.data_.begin());
  return out;
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>* const> samples) {
  if (samples.empty()) return {};
  Shape s = samples.front()->shape();
  for (const auto* t : samples) {
    Shape expect = s;
    expect.n = t->n();
    require_same_shape(t->shape(), expect, "stack");
  }
  std::vector<T> out;
  int n = 0;
  for (const auto* t : samples) {
    out.insert(out.end(), t->data().begin(), t->data().end());
    n += t->n();
  }
  s.n = n;
  return Tensor<T>(s, std::move(out));
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> stack(std::span<const Tensor<float>* const>);
template Tensor<double> stack(std::span<const Tensor<double>* const>);

}  // namespace drnet
