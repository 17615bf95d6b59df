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

#include "drnet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace drnet {
namespace {

constexpr double kEightBitScale = 255.0 * 255.0;

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

EvalRow average_of(const std::vector<EvalRow>& rows) {
  EvalRow avg;
  avg.id = "average";
  for (const auto& r : rows) {
    avg.mse_8bit += r.mse_8bit;
    avg.mse_unit += r.mse_unit;
    avg.psnr += r.psnr;
    avg.ssim += r.ssim;
  }
  const double n = static_cast<double>(rows.size());
  avg.mse_8bit /= n;
  avg.mse_unit /= n;
  avg.psnr /= n;
  avg.ssim /= n;
  return avg;
}

template <typename T>
EvalRow score(const Tensor<T>& pred, const Tensor<T>& truth, std::string id,
              const SsimConfig& cfg) {
  EvalRow row;
  row.id = std::move(id);
  row.mse_unit = mse_metric(pred, truth, MseScale::unit);
  row.mse_8bit = row.mse_unit * kEightBitScale;
  row.psnr = psnr_from_mse(row.mse_unit, 1.0);
  row.ssim = ssim_metric(pred, truth, cfg);
  return row;
}

}  // namespace

template <typename T>
double mse_metric(const Tensor<T>& pred, const Tensor<T>& truth, MseScale scale) {
  require_same_shape(pred.shape(), truth.shape(), "mse_metric");
  require(pred.numel() > 0, ErrorCode::invalid_argument, "mse_metric: empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(truth[i]);
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(pred.numel());
  return scale == MseScale::eight_bit ? mse * kEightBitScale : mse;
}

double psnr_from_mse(double mse, double max_value) {
  require(mse >= 0.0 && max_value > 0.0, ErrorCode::invalid_argument,
          "psnr: mse must be >= 0 and max > 0");
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(max_value * max_value / mse));
}

template <typename T>
double psnr_metric(const Tensor<T>& pred, const Tensor<T>& truth) {
  return psnr_from_mse(mse_metric(pred, truth, MseScale::unit), 1.0);
}

template <typename T>
double ssim_metric(const Tensor<T>& pred, const Tensor<T>& truth, const SsimConfig& cfg) {
  const Tensor<T> map = ssim_map(pred, truth, cfg);
  double sum = 0.0;
  for (T v : map.data()) sum += static_cast<double>(v);
  return sum / static_cast<double>(map.numel());
}

template <typename T>
EvalReport evaluate_dataset(std::span<const Tensor<T>> outputs, std::span<const Tensor<T>> truths,
                            std::span<const std::string> ids, const std::string& method,
                            const std::string& dataset, const SsimConfig& cfg) {
  require(outputs.size() == truths.size() && outputs.size() == ids.size(),
          ErrorCode::invalid_argument,
          "evaluate_dataset: " + std::to_string(outputs.size()) + " outputs, " +
              std::to_string(truths.size()) + " truths, " + std::to_string(ids.size()) + " ids");
  require(!outputs.empty(), ErrorCode::invalid_argument, "evaluate_dataset: empty split");
  EvalReport report;
  report.method = method;
  report.dataset = dataset;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    report.rows.push_back(score(outputs[i], truths[i], ids[i], cfg));
  }
  report.average = average_of(report.rows);
  return report;
}

std::string sample_label(int scene_id, int sample_id) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "s%05d_h%02d", scene_id, sample_id);
  return buf;
}

template <typename T>
BaselineReports baseline_report(std::span<const Sample<T>> samples, const std::string& dataset,
                                const SsimConfig& cfg) {
  require(!samples.empty(), ErrorCode::invalid_argument, "baseline_report: empty dataset");
  BaselineReports out;
  out.identity.method = "identity";
  out.oracle.method = "oracle";
  out.identity.dataset = out.oracle.dataset = dataset;
  for (const auto& s : samples) {
    const std::string id = sample_label(s.scene_id, s.sample_id);
    out.identity.rows.push_back(score(s.hazy, s.clear, id, cfg));
    const Tensor<T> inverted = analytic_dehaze(s.hazy, s.transmission, s.params.airlight);
    out.oracle.rows.push_back(score(inverted, s.clear, id, cfg));
  }
  out.identity.average = average_of(out.identity.rows);
  out.oracle.average = average_of(out.oracle.rows);
  return out;
}

std::string format_report_table(std::span<const EvalReport> reports, const SsimConfig& cfg) {
  std::string out;
  out += "# ssim: per-channel mean, ";
  out += cfg.window == SsimConfig::Window::box ? "box" : "gaussian";
  out += " window " + std::to_string(cfg.patch_size) + "x" + std::to_string(cfg.patch_size) +
         ", c1=" + number(cfg.c1) + ", c2=" + number(cfg.c2) + "\n";
  out += "# psnr: mean of per-image values; mse_8bit = 65025 * mse_unit\n";
  char line[256];
  for (const auto& r : reports) {
    out += "\nmethod: " + r.method + "  dataset: " + r.dataset + "  images: " +
           std::to_string(r.rows.size()) + "\n";
    std::snprintf(line, sizeof(line), "%-16s %12s %12s %10s %8s\n", "id", "mse_8bit",
                  "mse_unit", "psnr_db", "ssim");
    out += line;
    auto emit = [&](const EvalRow& row) {
      std::snprintf(line, sizeof(line), "%-16s %12.3f %12.8f %10.4f %8.5f\n", row.id.c_str(),
                    row.mse_8bit, row.mse_unit, row.psnr, row.ssim);
      out += line;
    };
    for (const auto& row : r.rows) emit(row);
    emit(r.average);
  }
  return out;
}

std::string format_report_csv(std::span<const EvalReport> reports) {
  std::string out = "method,dataset,id,mse_8bit,mse_unit,psnr_db,ssim\n";
  for (const auto& r : reports) {
    auto emit = [&](const EvalRow& row) {
      out += r.method + "," + r.dataset + "," + row.id + "," + number(row.mse_8bit) + "," +
             number(row.mse_unit) + "," + number(row.psnr) + "," + number(row.ssim) + "\n";
    };
    for (const auto& row : r.rows) emit(row);
    emit(r.average);
  }
  return out;
}

#define DRNET_INSTANTIATE_EVALUATION(T)                                                        \
  template double mse_metric(const Tensor<T>&, const Tensor<T>&, MseScale);                    \
  template double psnr_metric(const Tensor<T>&, const Tensor<T>&);                             \
  template double ssim_metric(const Tensor<T>&, const Tensor<T>&, const SsimConfig&);          \
  template EvalReport evaluate_dataset(std::span<const Tensor<T>>, std::span<const Tensor<T>>, \
                                       std::span<const std::string>, const std::string&,       \
                                       const std::string&, const SsimConfig&);                 \
  template BaselineReports baseline_report(std::span<const Sample<T>>, const std::string&,     \
                                           const SsimConfig&);

DRNET_INSTANTIATE_EVALUATION(float)
DRNET_INSTANTIATE_EVALUATION(double)

#undef DRNET_INSTANTIATE_EVALUATION

}  // namespace drnet
