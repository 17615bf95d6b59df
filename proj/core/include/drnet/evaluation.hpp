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

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drnet/haze_model.hpp"
#include "drnet/ssim.hpp"
#include "drnet/tensor.hpp"

namespace drnet {

enum class MseScale { unit, eight_bit };

/// PSNR reported for identical images.
inline constexpr double kPsnrCap = 99.0;

template <typename T>
double mse_metric(const Tensor<T>& pred, const Tensor<T>& truth, MseScale scale = MseScale::unit);

/// 10 log10(max^2 / mse), capped at kPsnrCap.
double psnr_from_mse(double mse, double max_value);

/// Scale-independent: MAX and MSE are taken on the same scale.
template <typename T>
double psnr_metric(const Tensor<T>& pred, const Tensor<T>& truth);

/// Mean SSIM over every pixel of every channel.
template <typename T>
double ssim_metric(const Tensor<T>& pred, const Tensor<T>& truth, const SsimConfig& cfg = {});

struct EvalRow {
  std::string id;
  double mse_8bit = 0.0;
  double mse_unit = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::string method;
  std::string dataset;
  std::vector<EvalRow> rows;
  EvalRow average;  // id "average"; psnr is the mean of per-row values
};

/// Rows in input order. Throws on length mismatch or an empty list.
template <typename T>
EvalReport evaluate_dataset(std::span<const Tensor<T>> outputs, std::span<const Tensor<T>> truths,
                            std::span<const std::string> ids, const std::string& method,
                            const std::string& dataset, const SsimConfig& cfg = {});

struct BaselineReports {
  EvalReport identity;  // hazy input scored against the clear image
  EvalReport oracle;    // analytic inverse with the true transmission and airlight
};

template <typename T>
BaselineReports baseline_report(std::span<const Sample<T>> samples, const std::string& dataset,
                                const SsimConfig& cfg = {});

std::string sample_label(int scene_id, int sample_id);

/// Aligned text table: one block per report, averages last.
std::string format_report_table(std::span<const EvalReport> reports, const SsimConfig& cfg);
/// Header "method,dataset,id,mse_8bit,mse_unit,psnr_db,ssim", one line per row
/// plus an "average" line per report.
std::string format_report_csv(std::span<const EvalReport> reports);

}  // namespace drnet
