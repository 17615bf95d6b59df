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

#include <utility>

#include "drnet/tensor.hpp"

namespace drnet {

/// Concatenates along channels, a's channels first. An empty b (no elements)
/// returns a unchanged.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Inverse of concat_channels for gradients: the first `first_channels`
/// channels go to the first tensor, the rest to the second.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& x, int first_channels);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
void add_in_place(Tensor<T>& acc, const Tensor<T>& x);

/// Mean over H and W: (N, C, H, W) -> (N, C, 1, 1).
template <typename T>
Tensor<T> global_average_pool(const Tensor<T>& x);

template <typename T>
Tensor<T> global_average_pool_backward(const Shape& input_shape, const Tensor<T>& grad_out);

/// Clamps every element into [lo, hi].
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

}  // namespace drnet
