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

/// A zero-padded 2-D convolution (cross-correlation, no kernel flip).
///
/// The kernel is (out_channels, in_channels, k, k) with odd k and the padding is
/// always (k - 1) / 2, so a stride-1 layer preserves H and W. Only strides 1 and 2
/// are supported.
template <typename T>
struct ConvLayer {
  Tensor<T> kernel;
  Tensor<T> bias;  // (out_channels, 1, 1, 1)
  int stride = 1;

  static ConvLayer make(int in_channels, int out_channels, int kernel_size, int stride = 1);

  int out_channels() const { return kernel.n(); }
  int in_channels() const { return kernel.c(); }
  int kernel_size() const { return kernel.h(); }
  int padding() const { return (kernel.h() - 1) / 2; }

  Shape output_shape(const Shape& input) const;
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> kernel;
  Tensor<T> bias;
};

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer);

/// Exact gradients of conv2d_forward. Weight and bias gradients are summed over
/// the batch in sample order.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvLayer<T>& layer,
                             const Tensor<T>& grad_out);

extern template struct ConvLayer<float>;
extern template struct ConvLayer<double>;

}  // namespace drnet
