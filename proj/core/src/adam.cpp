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

#include "drnet/numerics/adam.hpp"

#include <cmath>
#include <utility>

namespace drnet {

template <typename T>
void adam_step(std::span<const ParamRef<T>> params, AdamState<T>& state) {
  for (const auto& p : params) {
    require(p.tensor->has_grad(), ErrorCode::invalid_argument,
            "adam_step: parameter '" + p.name + "' has no gradient buffer");
    const auto g = std::as_const(*p.tensor).grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        fail(ErrorCode::non_finite, "adam_step: non-finite gradient in parameter '" + p.name +
                                        "' at index " + std::to_string(i));
      }
    }
  }

  ++state.step;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const T lr = static_cast<T>(cfg.learning_rate);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T eps = static_cast<T>(cfg.epsilon);
  const T correction1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));

  for (const auto& p : params) {
    auto values = p.tensor->data();
    const auto g = std::as_const(*p.tensor).grad();
    auto& mom = state.moments[p.name];
    if (mom.first.size() != values.size()) {
      require(mom.first.empty(), ErrorCode::shape_mismatch,
              "adam_step: moment buffers for '" + p.name + "' have " +
                  std::to_string(mom.first.size()) + " entries, parameter has " +
                  std::to_string(values.size()));
      mom.first.assign(values.size(), T(0));
      mom.second.assign(values.size(), T(0));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      mom.first[i] = b1 * mom.first[i] + (T(1) - b1) * g[i];
      mom.second[i] = b2 * mom.second[i] + (T(1) - b2) * g[i] * g[i];
      const T m_hat = mom.first[i] / correction1;
      const T v_hat = mom.second[i] / correction2;
      values[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template void adam_step(std::span<const ParamRef<float>>, AdamState<float>&);
template void adam_step(std::span<const ParamRef<double>>, AdamState<double>&);

}  // namespace drnet
