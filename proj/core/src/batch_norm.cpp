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

#include "drnet/numerics/batch_norm.hpp"

#include <cmath>

namespace drnet {

template <typename T>
BatchNorm<T> BatchNorm<T>::make(int channels) {
  BatchNorm bn;
  const Shape s{channels, 1, 1, 1};
  bn.gamma = Tensor<T>(s, T(1));
  bn.beta = Tensor<T>(s, T(0));
  bn.running_mean = Tensor<T>(s, T(0));
  bn.running_var = Tensor<T>(s, T(1));
  return bn;
}

template <typename T>
Tensor<T> batch_norm_forward(const Tensor<T>& x, BatchNorm<T>& bn, Mode mode,
                             BatchNormCache<T>* cache) {
  const int channels = x.c();
  require(channels == bn.channels(), ErrorCode::shape_mismatch,
          "batch_norm: input has C=" + std::to_string(channels) + ", layer expects " +
              std::to_string(bn.channels()));
  const std::size_t count = static_cast<std::size_t>(x.n()) * x.shape().plane();
  if (mode == Mode::train) {
    require(count >= 2, ErrorCode::invalid_argument,
            "batch_norm: train mode needs N*H*W >= 2 per channel, got " + std::to_string(count) +
                " for input " + x.shape().str());
  }

  Tensor<T> y(x.shape());
  Tensor<T> normalized(x.shape());
  std::vector<T> inv_std(static_cast<std::size_t>(channels));
  const T eps = static_cast<T>(bn.epsilon);
  const T momentum = static_cast<T>(bn.momentum);

  for (int c = 0; c < channels; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    T mean;
    T var;
    if (mode == Mode::train) {
      T sum = T(0);
      for (int n = 0; n < x.n(); ++n)
        for (T v : x.plane(n, c)) sum += v;
      mean = sum / static_cast<T>(count);
      T sq = T(0);
      for (int n = 0; n < x.n(); ++n)
        for (T v : x.plane(n, c)) sq += (v - mean) * (v - mean);
      var = sq / static_cast<T>(count);
      const T unbiased = sq / static_cast<T>(count - 1);
      bn.running_mean[ci] = (T(1) - momentum) * bn.running_mean[ci] + momentum * mean;
      bn.running_var[ci] = (T(1) - momentum) * bn.running_var[ci] + momentum * unbiased;
    } else {
      mean = bn.running_mean[ci];
      var = bn.running_var[ci];
    }
    const T istd = T(1) / std::sqrt(var + eps);
    inv_std[ci] = istd;
    const T g = bn.gamma[ci];
    const T b = bn.beta[ci];
    for (int n = 0; n < x.n(); ++n) {
      const auto in = x.plane(n, c);
      auto nrm = normalized.plane(n, c);
      auto out = y.plane(n, c);
      for (std::size_t i = 0; i < in.size(); ++i) {
        nrm[i] = (in[i] - mean) * istd;
        out[i] = g * nrm[i] + b;
      }
    }
  }

  if (cache) {
    cache->mode = mode;
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
Tensor<T> batch_norm_eval(const Tensor<T>& x, const BatchNorm<T>& bn) {
  require(x.c() == bn.channels(), ErrorCode::shape_mismatch,
          "batch_norm: input has C=" + std::to_string(x.c()) + ", layer expects " +
              std::to_string(bn.channels()));
  Tensor<T> y(x.shape());
  const T eps = static_cast<T>(bn.epsilon);
  for (int c = 0; c < x.c(); ++c) {
    const auto ci = static_cast<std::size_t>(c);
    const T mean = bn.running_mean[ci];
    const T istd = T(1) / std::sqrt(bn.running_var[ci] + eps);
    const T g = bn.gamma[ci];
    const T b = bn.beta[ci];
    for (int n = 0; n < x.n(); ++n) {
      const auto in = x.plane(n, c);
      auto out = y.plane(n, c);
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = g * ((in[i] - mean) * istd) + b;
    }
  }
  return y;
}

template <typename T>
BatchNormGrads<T> batch_norm_backward(const BatchNormCache<T>& cache, const BatchNorm<T>& bn,
                                      const Tensor<T>& grad_out) {
  const Tensor<T>& xhat = cache.normalized;
  require_same_shape(grad_out.shape(), xhat.shape(), "batch_norm_backward");
  BatchNormGrads<T> grads{Tensor<T>(xhat.shape()), Tensor<T>(bn.gamma.shape()),
                          Tensor<T>(bn.beta.shape())};
  const int channels = xhat.c();
  const T count = static_cast<T>(static_cast<std::size_t>(xhat.n()) * xhat.shape().plane());

  for (int c = 0; c < channels; ++c) {
    const auto ci = static_cast<std::size_t>(c);
    T sum_g = T(0);
    T sum_gx = T(0);
    for (int n = 0; n < xhat.n(); ++n) {
      const auto go = grad_out.plane(n, c);
      const auto xh = xhat.plane(n, c);
      for (std::size_t i = 0; i < go.size(); ++i) {
        sum_g += go[i];
        sum_gx += go[i] * xh[i];
      }
    }
    grads.gamma[ci] = sum_gx;
    grads.beta[ci] = sum_g;
    const T scale = bn.gamma[ci] * cache.inv_std[ci];
    for (int n = 0; n < xhat.n(); ++n) {
      const auto go = grad_out.plane(n, c);
      const auto xh = xhat.plane(n, c);
      auto gi = grads.input.plane(n, c);
      if (cache.mode == Mode::train) {
        for (std::size_t i = 0; i < go.size(); ++i)
          gi[i] = scale * (go[i] - sum_g / count - xh[i] * sum_gx / count);
      } else {
        for (std::size_t i = 0; i < go.size(); ++i) gi[i] = scale * go[i];
      }
    }
  }
  return grads;
}

template struct BatchNorm<float>;
template struct BatchNorm<double>;
template Tensor<float> batch_norm_forward(const Tensor<float>&, BatchNorm<float>&, Mode,
                                          BatchNormCache<float>*);
template Tensor<double> batch_norm_forward(const Tensor<double>&, BatchNorm<double>&, Mode,
                                           BatchNormCache<double>*);
template Tensor<float> batch_norm_eval(const Tensor<float>&, const BatchNorm<float>&);
template Tensor<double> batch_norm_eval(const Tensor<double>&, const BatchNorm<double>&);
template BatchNormGrads<float> batch_norm_backward(const BatchNormCache<float>&,
                                                   const BatchNorm<float>&, const Tensor<float>&);
template BatchNormGrads<double> batch_norm_backward(const BatchNormCache<double>&,
                                                    const BatchNorm<double>&,
                                                    const Tensor<double>&);

}  // namespace drnet
