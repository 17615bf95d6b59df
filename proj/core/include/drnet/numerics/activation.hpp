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

/// Elementwise nonlinearity. scaled_tanh is 0.5 * (tanh(x) + 1), mapping the
/// reals onto image intensities in [0, 1].
struct Activation {
  enum class Kind { identity, relu, leaky_relu, sigmoid, scaled_tanh };

  Kind kind = Kind::identity;
  double slope = 0.0;  // leaky_relu only

  static Activation identity() { return {Kind::identity, 0.0}; }
  static Activation relu() { return {Kind::relu, 0.0}; }
  static Activation leaky_relu(double slope) { return {Kind::leaky_relu, slope}; }
  static Activation sigmoid() { return {Kind::sigmoid, 0.0}; }
  static Activation scaled_tanh() { return {Kind::scaled_tanh, 0.0}; }
};

template <typename T>
Tensor<T> activation_forward(const Tensor<T>& x, Activation act);

/// Gradient with respect to the pre-activation input x.
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& x, Activation act, const Tensor<T>& grad_out);

}  // namespace drnet
