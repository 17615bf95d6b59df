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

#include <vector>

#include "drnet/tensor.hpp"

namespace drnet {

enum class Mode { train, eval };

/// Per-channel batch normalization over (N, H, W).
///
/// Train mode normalizes with the biased batch variance and folds the batch
/// statistics into the running estimates (the unbiased variance is folded in);
/// eval mode normalizes with the running estimates.
template <typename T>
struct BatchNorm {
  Tensor<T> gamma;         // (C,1,1,1), trainable
  Tensor<T> beta;          // (C,1,1,1), trainable
  Tensor<T> running_mean;  // (C,1,1,1), buffer
  Tensor<T> running_var;   // (C,1,1,1), buffer
  double momentum = 0.1;
  double epsilon = 1e-5;

  static BatchNorm make(int channels);
  int channels() const { return gamma.n(); }
};

template <typename T>
struct BatchNormCache {
  Mode mode = Mode::eval;
  Tensor<T> normalized;
  std::vector<T> inv_std;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

/// Throws when train mode sees fewer than two elements per channel.
template <typename T>
Tensor<T> batch_norm_forward(const Tensor<T>& x, BatchNorm<T>& bn, Mode mode,
                             BatchNormCache<T>* cache = nullptr);

/// Eval-mode normalization with the running statistics; never mutates `bn`.
template <typename T>
Tensor<T> batch_norm_eval(const Tensor<T>& x, const BatchNorm<T>& bn);

template <typename T>
BatchNormGrads<T> batch_norm_backward(const BatchNormCache<T>& cache, const BatchNorm<T>& bn,
                                      const Tensor<T>& grad_out);

}  // namespace drnet
