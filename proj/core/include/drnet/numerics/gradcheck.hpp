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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drnet/numerics/adam.hpp"

namespace drnet {

struct GradcheckOptions {
  double step = 1e-4;
  double floor = 1e-8;
  /// 0 checks every entry; otherwise a seeded random subset per parameter.
  std::size_t max_entries_per_param = 0;
  /// Subset selection: the entries with the largest analytic magnitude instead
  /// of a random draw.
  bool largest_first = false;
  std::uint64_t seed = 0;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Objective evaluated at the current parameter values. When `with_grad` is
/// true it must also leave d(objective)/d(param) in every parameter's grad
/// buffer (overwriting, not accumulating).
template <typename T>
using Objective = std::function<T(bool with_grad)>;

/// Compares analytic gradients to central differences
/// (f(p + h) - f(p - h)) / 2h, entry by entry, and reports the worst relative
/// error |a - n| / max(|a|, |n|, floor).
template <typename T>
GradcheckResult gradcheck(const Objective<T>& objective, std::span<const ParamRef<T>> params,
                          const GradcheckOptions& options = {}) {
  objective(true);
  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    const auto g = std::as_const(*p.tensor).grad();
    analytic.emplace_back(g.begin(), g.end());
  }

  std::mt19937_64 rng(options.seed);
  GradcheckResult result;
  const T h = static_cast<T>(options.step);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].tensor->data();
    std::vector<std::size_t> indices(values.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    if (options.max_entries_per_param > 0 && indices.size() > options.max_entries_per_param) {
      const auto& a = analytic[pi];
      if (options.largest_first) {
        std::stable_sort(indices.begin(), indices.end(), [&](std::size_t l, std::size_t r) {
          return std::abs(a[l]) > std::abs(a[r]);
        });
      } else {
        std::shuffle(indices.begin(), indices.end(), rng);
      }
      indices.resize(options.max_entries_per_param);
    }
    for (std::size_t idx : indices) {
      const T saved = values[idx];
      values[idx] = saved + h;
      const double plus = static_cast<double>(objective(false));
      values[idx] = saved - h;
      const double minus = static_cast<double>(objective(false));
      values[idx] = saved;
      const double numeric = (plus - minus) / (2.0 * static_cast<double>(h));
      const double a = static_cast<double>(analytic[pi][idx]);
      const double err = relative_error(a, numeric, options.floor);
      ++result.entries_checked;
      if (result.worst_param.empty() || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = params[pi].name;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace drnet
