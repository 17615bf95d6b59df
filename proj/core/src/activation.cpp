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

#include "drnet/numerics/activation.hpp"

#include <cmath>

namespace drnet {
namespace {

template <typename T>
T sigmoid(T x) {
  // Split on sign so exp never overflows.
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> activation_forward(const Tensor<T>& x, Activation act) {
  Tensor<T> y(x.shape());
  const auto in = x.data();
  auto out = y.data();
  const T slope = static_cast<T>(act.slope);
  switch (act.kind) {
    case Activation::Kind::identity:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i];
      break;
    case Activation::Kind::relu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
      break;
    case Activation::Kind::leaky_relu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? in[i] : slope * in[i];
      break;
    case Activation::Kind::sigmoid:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = sigmoid(in[i]);
      break;
    case Activation::Kind::scaled_tanh:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = T(0.5) * (std::tanh(in[i]) + T(1));
      break;
  }
  return y;
}

template <typename T>
Tensor<T> activation_backward(const Tensor<T>& x, Activation act, const Tensor<T>& grad_out) {
  require_same_shape(grad_out.shape(), x.shape(), "activation_backward");
  Tensor<T> g(x.shape());
  const auto in = x.data();
  const auto go = grad_out.data();
  auto out = g.data();
  const T slope = static_cast<T>(act.slope);
  switch (act.kind) {
    case Activation::Kind::identity:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = go[i];
      break;
    case Activation::Kind::relu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? go[i] : T(0);
      break;
    case Activation::Kind::leaky_relu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > T(0) ? go[i] : slope * go[i];
      break;
    case Activation::Kind::sigmoid:
      for (std::size_t i = 0; i < in.size(); ++i) {
        const T s = sigmoid(in[i]);
        out[i] = go[i] * s * (T(1) - s);
      }
      break;
    case Activation::Kind::scaled_tanh:
      for (std::size_t i = 0; i < in.size(); ++i) {
        const T t = std::tanh(in[i]);
        out[i] = go[i] * T(0.5) * (T(1) - t * t);
      }
      break;
  }
  return g;
}

template Tensor<float> activation_forward(const Tensor<float>&, Activation);
template Tensor<double> activation_forward(const Tensor<double>&, Activation);
template Tensor<float> activation_backward(const Tensor<float>&, Activation, const Tensor<float>&);
template Tensor<double> activation_backward(const Tensor<double>&, Activation,
                                            const Tensor<double>&);

}  // namespace drnet
