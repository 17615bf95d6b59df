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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drnet/tensor.hpp"

namespace drnet {

/// A named trainable tensor; its gradient lives in the tensor's grad buffer.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor = nullptr;
};

struct AdamConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  struct Moments {
    std::vector<T> first;
    std::vector<T> second;
  };

  AdamConfig config;
  std::int64_t step = 0;
  std::map<std::string, Moments> moments;  // keyed by parameter name
};

/// One bias-corrected ADAM update over every parameter. The step counter is
/// incremented before bias correction. A non-finite gradient aborts the whole
/// step (nothing is modified) with an error naming the parameter.
template <typename T>
void adam_step(std::span<const ParamRef<T>> params, AdamState<T>& state);

template <typename T>
void zero_grads(std::span<const ParamRef<T>> params) {
  for (const auto& p : params) p.tensor->zero_grad();
}

}  // namespace drnet
