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

#include "drnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "drnet/config.hpp"
#include "drnet/evaluation.hpp"
#include "drnet/numerics/gradcheck.hpp"
#include "drnet/numerics/layout.hpp"

namespace drnet {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kTargetSeedOffset = 1'000'000;
constexpr std::uint64_t kHeldoutSeedOffset = 2'000'000;
constexpr int kSpotCheckCrop = 16;
constexpr std::size_t kSpotCheckEntries = 2;

// Stream position p of a seeded sequence of epoch permutations over n items.
class BatchOrder {
 public:
  BatchOrder(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

  std::vector<std::size_t> batch(std::int64_t step, int size) {
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(size));
    for (int b = 0; b < size; ++b) {
      const auto pos = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(size) +
                       static_cast<std::uint64_t>(b);
      const std::uint64_t epoch = pos / n_;
      if (epoch != epoch_ || perm_.empty()) shuffle_epoch(epoch);
      out.push_back(perm_[pos % n_]);
    }
    return out;
  }

 private:
  void shuffle_epoch(std::uint64_t epoch) {
    epoch_ = epoch;
    perm_.resize(n_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    std::mt19937_64 rng(seed_ * 0x9E3779B97F4A7C15ULL + epoch);
    std::shuffle(perm_.begin(), perm_.end(), rng);
  }

  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> perm_;
};

template <typename T>
void scale_in_place(Tensor<T>& t, double factor) {
  if (factor == 1.0) return;
  for (T& v : t.data()) v = static_cast<T>(v * factor);
}

template <typename T>
Tensor<T> crop(const Tensor<T>& x, int count, int size) {
  const int h = std::min(size, x.h());
  const int w = std::min(size, x.w());
  const int n = std::min(count, x.n());
  Tensor<T> out(Shape{n, x.c(), h, w});
  for (int b = 0; b < n; ++b)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < w; ++xx) out.at(b, c, y, xx) = x.at(b, c, y, xx);
  return out;
}

template <typename T>
Tensor<T> stack_pool(std::span<const Tensor<float>> pool, const std::vector<std::size_t>& idx) {
  std::vector<const Tensor<float>*> ptrs;
  for (std::size_t i : idx) ptrs.push_back(&pool[i]);
  return stack<float>(ptrs).template cast<T>();
}

// --- objectives ---------------------------------------------------------------

template <typename T>
struct DehazeBatch {
  Tensor<T> hazy;
  Tensor<T> clear;
  Tensor<T> transmission;

  template <typename U>
  DehazeBatch<U> cast() const {
    return {hazy.template cast<U>(), clear.template cast<U>(), transmission.template cast<U>()};
  }
  DehazeBatch cropped(int count, int size) const {
    return {crop(hazy, count, size), crop(clear, count, size), crop(transmission, count, size)};
  }
};

template <typename T>
LossReport dehaze_objective(DehazingModel<T>& model, const DehazeBatch<T>& batch,
                            const TrainConfig& cfg, bool with_grad) {
  if (with_grad) zero_all_grads(model);
  auto out = model.forward(batch.hazy);
  LossReport report;
  Tensor<T> g_coarse;
  Tensor<T> g_fine;
  double tp = 0.0;
  if (model.uses_transmission()) {
    auto loss = tp_total(out.coarse, out.fine, batch.transmission, cfg.ssim);
    report.components = loss.report.components;
    tp = loss.report.total;
    g_coarse = std::move(loss.grad_coarse);
    g_fine = std::move(loss.grad_fine);
    scale_in_place(g_coarse, cfg.transmission_loss_weight);
    scale_in_place(g_fine, cfg.transmission_loss_weight);
  }
  auto d = d_total(out.residual, batch.hazy, batch.clear, cfg.ssim);
  for (const auto& c : d.report.components) report.components.push_back(c);
  report.total = cfg.transmission_loss_weight * tp + cfg.dehaze_loss_weight * d.report.total;
  if (with_grad) {
    scale_in_place(d.grad_residual, cfg.dehaze_loss_weight);
    model.backward(g_coarse, g_fine, d.grad_residual);
  }
  return report;
}

template <typename T>
LossReport content_objective(GeneratorNet<T>& g, const Tensor<T>& x, const TrainConfig& cfg,
                             bool with_grad) {
  if (with_grad) zero_all_grads(g);
  const Tensor<T> refined = g.forward(x, Mode::train);
  auto loss = rf_content(refined, x, cfg.ssim);
  if (with_grad) g.backward(loss.grad_refined);
  return loss.report;
}

template <typename T>
LossReport generator_objective(GeneratorNet<T>& g, DiscriminatorNet<T>& d, const Tensor<T>& x,
                               const TrainConfig& cfg, bool with_grad) {
  if (with_grad) zero_all_grads(g);
  const Tensor<T> refined = g.forward(x, Mode::train);
  const Tensor<T> scores = d.forward(refined, Mode::train);
  auto loss = rf_total(refined, x, scores, cfg.ssim, cfg.adversarial_weight);
  if (with_grad) {
    Tensor<T> grad = std::move(loss.grad_refined);
    add_in_place(grad, d.backward(loss.grad_d_fake));
    zero_all_grads(d);
    g.backward(grad);
  }
  return loss.report;
}

struct DiscriminatorStep {
  LossReport report;
  double saturation = 0.0;  // mean |D - 0.5| over real and fake scores
};

template <typename T>
DiscriminatorStep discriminator_objective(DiscriminatorNet<T>& d, const Tensor<T>& real,
                                          const Tensor<T>& fake, bool with_grad) {
  if (with_grad) zero_all_grads(d);
  const Tensor<T> s_real = d.forward(real, Mode::train);
  const auto real_loss = adversarial_losses(s_real, Tensor<T>{});
  if (with_grad) d.backward(real_loss.d_grad_real);
  const Tensor<T> s_fake = d.forward(fake, Mode::train);
  const auto fake_loss = adversarial_losses(Tensor<T>{}, s_fake);
  if (with_grad) d.backward(fake_loss.d_grad_fake);

  DiscriminatorStep out;
  out.report.components = {{"d_real", real_loss.discriminator}, {"d_fake", fake_loss.discriminator}};
  out.report.total = real_loss.discriminator + fake_loss.discriminator;
  double sat = 0.0;
  for (T v : s_real.data()) sat += std::abs(static_cast<double>(v) - 0.5);
  for (T v : s_fake.data()) sat += std::abs(static_cast<double>(v) - 0.5);
  out.saturation = sat / static_cast<double>(s_real.numel() + s_fake.numel());
  return out;
}

// --- gradient spot check ------------------------------------------------------------

// Double-precision analytic gradients of `objective` (run on a copy) against
// central differences, on the largest-magnitude entries of every trainable
// tensor.
template <template <typename> class Net>
double spot_check(const Net<float>& net, const std::function<double(Net<double>&, bool)>& objective,
                  const std::string& what, double tolerance) {
  Net<double> nd = net.template cast_network<double>();
  zero_all_grads(nd);
  objective(nd, true);
  Net<double> probe = nd;
  const auto pf = trainable_parameters(nd);
  const auto pd = trainable_parameters(probe);
  double worst = 0.0;
  std::string worst_name;
  for (std::size_t p = 0; p < pf.size(); ++p) {
    const auto g = std::as_const(*pf[p].tensor).grad();
    std::vector<std::size_t> idx(g.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t k = std::min(kSpotCheckEntries, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) { return std::abs(g[a]) > std::abs(g[b]); });
    auto values = pd[p].tensor->data();
    for (std::size_t e = 0; e < k; ++e) {
      const std::size_t i = idx[e];
      const double saved = values[i];
      // A ReLU kink inside the stencil spoils one step size but rarely both.
      double err = std::numeric_limits<double>::infinity();
      for (const double h : {1e-5, 1e-6}) {
        values[i] = saved + h;
        const double plus = objective(probe, false);
        values[i] = saved - h;
        const double minus = objective(probe, false);
        values[i] = saved;
        err = std::min(err, relative_error(g[i], (plus - minus) / (2 * h), 1e-6));
      }
      if (err > worst) {
        worst = err;
        worst_name = pf[p].name;
      }
    }
  }
  require(worst <= tolerance, ErrorCode::gradient_check,
          what + " gradient spot check failed: relative error " + std::to_string(worst) +
              " at '" + worst_name + "'");
  return worst;
}

// --- logging ------------------------------------------------------------------------

class Recorder {
 public:
  Recorder(TrainLog& log, const TrainHooks& hooks, bool wall_clock)
      : log_(log), hooks_(hooks), wall_clock_(wall_clock), start_(Clock::now()) {}

  LogRecord& add(std::string stage, std::int64_t step, const LossReport& report) {
    LogRecord r;
    r.stage = std::move(stage);
    r.step = step;
    r.losses = report.components;
    r.total = report.total;
    if (wall_clock_) r.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    log_.records.push_back(std::move(r));
    return log_.records.back();
  }
  void flush_last() {
    if (hooks_.on_record && !log_.records.empty()) hooks_.on_record(log_.records.back());
  }

 private:
  TrainLog& log_;
  const TrainHooks& hooks_;
  bool wall_clock_;
  Clock::time_point start_;
};

void set_validation(LogRecord& r, const ValidationMetrics& m) {
  r.validation = {{"val_mse", m.mse}, {"val_psnr", m.psnr}, {"val_ssim", m.ssim}};
}

bool due(std::int64_t step, int every) { return every > 0 && step % every == 0; }

std::string step_tag(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step-%06lld", static_cast<long long>(step));
  return buf;
}

// --- metadata -----------------------------------------------------------------------

void put_arch(Checkpoint& ckpt, const ArchitectureConfig& a) {
  ckpt.metadata["arch.removal_blocks"] = std::to_string(a.removal_blocks);
  ckpt.metadata["arch.removal_layers_per_block"] = std::to_string(a.removal_layers_per_block);
  ckpt.metadata["arch.removal_width"] = std::to_string(a.removal_width);
  ckpt.metadata["arch.generator_depth"] = std::to_string(a.generator_depth);
  ckpt.metadata["arch.generator_skips"] = std::to_string(a.generator_skips);
  ckpt.metadata["arch.generator_width"] = std::to_string(a.generator_width);
}

ArchitectureConfig get_arch(const Checkpoint& ckpt) {
  ArchitectureConfig a;
  auto get = [&](const char* key) { return std::stoi(ckpt.meta(key)); };
  a.removal_blocks = get("arch.removal_blocks");
  a.removal_layers_per_block = get("arch.removal_layers_per_block");
  a.removal_width = get("arch.removal_width");
  a.generator_depth = get("arch.generator_depth");
  a.generator_skips = get("arch.generator_skips");
  a.generator_width = get("arch.generator_width");
  return a;
}

void put_common(Checkpoint& ckpt, const TrainConfig& cfg, const std::string& stage,
                std::int64_t step) {
  ckpt.metadata["format"] = "drnet";
  ckpt.metadata["stage"] = stage;
  ckpt.metadata["seed"] = std::to_string(cfg.seed);
  ckpt.metadata["step"] = std::to_string(step);
  ckpt.metadata["config_hash"] = config_hash(cfg);
  put_arch(ckpt, cfg.arch);
}

Checkpoint dehaze_checkpoint(DehazingModel<float>& model, const AdamState<float>& opt,
                             const TrainConfig& cfg) {
  Checkpoint ckpt;
  put_common(ckpt, cfg, cfg.ablation_no_transmission ? "ablation" : "dehaze", opt.step);
  ckpt.metadata["model.transmission"] = model.uses_transmission() ? "1" : "0";
  store_network(ckpt, model);
  const auto params = trainable_parameters(model);
  store_adam(ckpt, opt, params, "adam.dehaze");
  return ckpt;
}

// --- dehazing loop ------------------------------------------------------------------

DehazeRun train_dehaze_impl(const Dataset<float>& data, TrainConfig cfg,
                            const Checkpoint* resume, const TrainHooks& hooks) {
  cfg.validate();
  require(!data.train.empty(), ErrorCode::invalid_argument, "training split is empty");
  require(!data.validation.empty(), ErrorCode::invalid_argument, "validation split is empty");
  require(static_cast<std::size_t>(cfg.batch_size_dehaze) <= data.train.size(),
          ErrorCode::config,
          "batch_size_dehaze " + std::to_string(cfg.batch_size_dehaze) +
              " exceeds the training split (" + std::to_string(data.train.size()) + ")");

  DehazeRun run{DehazingModel<float>(cfg.arch, !cfg.ablation_no_transmission), {}, {}, {}};
  run.optimizer.config = cfg.adam;
  if (resume) {
    const bool transmission = resume->meta("model.transmission") == "1";
    require(transmission == !cfg.ablation_no_transmission && get_arch(*resume) == cfg.arch,
            ErrorCode::checkpoint_shape,
            "resume checkpoint does not match the configured architecture");
    load_network(*resume, run.model);
    const auto params = trainable_parameters(run.model);
    load_adam(*resume, run.optimizer, params, "adam.dehaze");
  } else {
    std::mt19937_64 init_rng(cfg.seed);
    init_weights(run.model, init_rng);
  }

  const std::string stage = cfg.ablation_no_transmission ? "ablation" : "dehaze";
  const auto params = trainable_parameters(run.model);
  BatchOrder order(data.train.size(), cfg.seed);
  Recorder recorder(run.log, hooks, cfg.record_wall_clock);
  const std::int64_t first = run.optimizer.step;
  const std::int64_t last = first + cfg.dehaze_steps;

  auto make_batch = [&](std::int64_t step) {
    const auto idx = order.batch(step, cfg.batch_size_dehaze);
    std::vector<const Tensor<float>*> hazy, clear, trans;
    for (std::size_t i : idx) {
      hazy.push_back(&data.train[i].hazy);
      clear.push_back(&data.train[i].clear);
      trans.push_back(&data.train[i].transmission);
    }
    return DehazeBatch<float>{stack<float>(hazy), stack<float>(clear), stack<float>(trans)};
  };

  auto diverge = [&](std::int64_t step, const std::string& why) {
    if (hooks.on_checkpoint) hooks.on_checkpoint(dehaze_checkpoint(run.model, run.optimizer, cfg), "last-good");
    fail(ErrorCode::diverged, stage + " training diverged at step " + std::to_string(step) + ": " + why);
  };

  for (std::int64_t s = first; s < last; ++s) {
    const std::int64_t step = s + 1;
    const DehazeBatch<float> batch = make_batch(s);
    double spot = -1.0;
    if (s == first && cfg.gradient_spot_check) {
      const auto small = batch.cropped(1, kSpotCheckCrop);
      const auto small_d = small.cast<double>();
      spot = spot_check<DehazingModel>(
          run.model,
          [&](DehazingModel<double>& m, bool grad) {
            return dehaze_objective(m, small_d, cfg, grad).total;
          },
          stage, cfg.spot_check_tolerance);
    }
    const LossReport report = dehaze_objective(run.model, batch, cfg, true);
    if (!std::isfinite(report.total)) diverge(step, "non-finite loss");
    try {
      adam_step<float>(params, run.optimizer);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::non_finite) throw;
      diverge(step, e.what());
    }
    LogRecord& rec = recorder.add(stage, step, report);
    if (spot >= 0.0) rec.note = "gradient spot check max relative error " + std::to_string(spot);
    if (due(step, cfg.validate_every) || step == last) {
      set_validation(rec, validate_dehazing(run.model, data.validation, cfg.ssim));
    }
    recorder.flush_last();
    if (due(step, cfg.checkpoint_every) && step != last && hooks.on_checkpoint) {
      hooks.on_checkpoint(dehaze_checkpoint(run.model, run.optimizer, cfg), step_tag(step));
    }
  }
  run.checkpoint = dehaze_checkpoint(run.model, run.optimizer, cfg);
  return run;
}

// --- refinement loop ---------------------------------------------------------------

double pool_content_mse(const GeneratorNet<float>& g, std::span<const Tensor<float>> pool,
                        double* ssim_out, const SsimConfig& ssim) {
  double mse = 0.0;
  double ss = 0.0;
  for (const auto& x : pool) {
    const Tensor<float> y = g.infer(x);
    mse += mse_metric(y, x);
    ss += ssim_metric(y, x, ssim);
  }
  if (ssim_out) *ssim_out = ss / static_cast<double>(pool.size());
  return mse / static_cast<double>(pool.size());
}

void set_refine_validation(LogRecord& r, const GeneratorNet<float>& g,
                           std::span<const Tensor<float>> pool, const SsimConfig& ssim) {
  double s = 0.0;
  const double mse = pool_content_mse(g, pool, &s, ssim);
  r.validation = {{"val_rf_mse", mse}, {"val_rf_ssim", s}};
}

void require_pool(std::span<const Tensor<float>> pool, const char* what) {
  require(!pool.empty(), ErrorCode::invalid_argument, std::string(what) + " pool is empty");
  const Shape s = pool.front().shape();
  for (const auto& t : pool) {
    require(t.shape() == s && t.n() == 1 && t.c() == 3, ErrorCode::shape_mismatch,
            std::string(what) + " pool images must all be (1,3,H,W) with one size; got " +
                t.shape().str() + " and " + s.str());
  }
}

}  // namespace

// --- public ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  auto positive = [](bool ok, const char* what) {
    require(ok, ErrorCode::config, std::string("train config: ") + what);
  };
  positive(adam.learning_rate > 0 && adam.beta1 > 0 && adam.beta1 < 1 && adam.beta2 > 0 &&
               adam.beta2 < 1 && adam.epsilon > 0,
           "optimizer settings out of range");
  positive(batch_size_dehaze > 0 && batch_size_refine > 0, "batch sizes must be positive");
  positive(dehaze_steps >= 0 && refine_content_steps >= 0 && refine_adversarial_steps >= 0,
           "step counts must be non-negative");
  positive(transmission_loss_weight > 0 && dehaze_loss_weight > 0 && adversarial_weight >= 0,
           "loss weights must be positive");
  positive(validate_every >= 0 && checkpoint_every >= 0, "cadences must be non-negative");
  positive(early_stop_window > 0 && early_stop_min_improvement >= 0 && saturation_window > 0,
           "early stop and saturation windows must be positive");
  positive(spot_check_tolerance > 0, "spot check tolerance must be positive");
  ssim.validate();
  arch.validate();
}

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["stage"] = r.stage;
    j["step"] = r.step;
    nlohmann::ordered_json losses = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.losses) losses[k] = v;
    j["losses"] = losses;
    j["total"] = r.total;
    if (!r.validation.empty()) {
      nlohmann::ordered_json val = nlohmann::ordered_json::object();
      for (const auto& [k, v] : r.validation) val[k] = v;
      j["validation"] = val;
    }
    if (!r.note.empty()) j["note"] = r.note;
    if (r.wall_seconds >= 0.0) j["wall_seconds"] = r.wall_seconds;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void TrainLog::append(const TrainLog& other) {
  records.insert(records.end(), other.records.begin(), other.records.end());
}

std::vector<const LogRecord*> TrainLog::with_validation() const {
  std::vector<const LogRecord*> out;
  for (const auto& r : records) {
    if (!r.validation.empty()) out.push_back(&r);
  }
  return out;
}

DehazeRun train_dehazing(const Dataset<float>& data, const TrainConfig& config,
                         const Checkpoint* resume, const TrainHooks& hooks) {
  return train_dehaze_impl(data, config, resume, hooks);
}

DehazeRun train_ablation(const Dataset<float>& data, const TrainConfig& config,
                         const Checkpoint* resume, const TrainHooks& hooks) {
  TrainConfig cfg = config;
  cfg.ablation_no_transmission = true;
  return train_dehaze_impl(data, cfg, resume, hooks);
}

RefineRun train_refinement(std::span<const Tensor<float>> dehazed_pool,
                           std::span<const Tensor<float>> target_pool,
                           std::span<const Tensor<float>> validation_pool,
                           const TrainConfig& config, const Checkpoint* base,
                           const TrainHooks& hooks) {
  const TrainConfig& cfg = config;
  cfg.validate();
  require_pool(dehazed_pool, "dehazed");
  require_pool(target_pool, "target");
  require_pool(validation_pool, "validation");

  RefineRun run{GeneratorNet<float>(cfg.arch), DiscriminatorNet<float>(), {}, {}, {}, {}, 0, 0};
  run.generator_optimizer.config = cfg.adam;
  run.discriminator_optimizer.config = cfg.adam;

  Checkpoint carried;
  bool resumed = false;
  if (base) {
    for (const auto& [name, t] : base->records) {
      if (name.rfind("generator.", 0) == 0 || name.rfind("discriminator.", 0) == 0 ||
          name.rfind("adam.", 0) == 0) {
        continue;
      }
      carried.put(name, t);
    }
    for (const auto& [k, v] : base->metadata) {
      if (k.rfind("model.", 0) == 0 || k.rfind("dehaze.", 0) == 0) carried.metadata[k] = v;
    }
    if (base->meta("stage") == "dehaze" || base->meta("stage") == "ablation") {
      carried.metadata["dehaze.step"] = base->meta("step");
    }
    if (base->meta("stage") == "refine") {
      require(get_arch(*base) == cfg.arch, ErrorCode::checkpoint_shape,
              "resume checkpoint does not match the configured architecture");
      load_network(*base, run.generator);
      load_network(*base, run.discriminator);
      const auto gp = trainable_parameters(run.generator);
      const auto dp = trainable_parameters(run.discriminator);
      load_adam(*base, run.generator_optimizer, gp, "adam.generator");
      load_adam(*base, run.discriminator_optimizer, dp, "adam.discriminator");
      run.content_steps_run = std::stoi(base->meta("refine.content_steps"));
      run.adversarial_steps_run = std::stoi(base->meta("refine.adversarial_steps"));
      resumed = true;
    }
  }
  if (!resumed) {
    std::mt19937_64 init_rng(cfg.seed + 1);
    init_weights(run.generator, init_rng);
    init_weights(run.discriminator, init_rng);
  }

  auto snapshot = [&]() {
    Checkpoint ckpt = carried;
    put_common(ckpt, cfg, "refine",
               static_cast<std::int64_t>(run.content_steps_run) + run.adversarial_steps_run);
    ckpt.metadata["refine.content_steps"] = std::to_string(run.content_steps_run);
    ckpt.metadata["refine.adversarial_steps"] = std::to_string(run.adversarial_steps_run);
    store_network(ckpt, run.generator);
    store_network(ckpt, run.discriminator);
    const auto gp = trainable_parameters(run.generator);
    const auto dp = trainable_parameters(run.discriminator);
    store_adam(ckpt, run.generator_optimizer, gp, "adam.generator");
    store_adam(ckpt, run.discriminator_optimizer, dp, "adam.discriminator");
    return ckpt;
  };
  auto diverge = [&](std::int64_t step, const std::string& why) {
    if (hooks.on_checkpoint) hooks.on_checkpoint(snapshot(), "last-good");
    fail(ErrorCode::diverged, "refinement diverged at step " + std::to_string(step) + ": " + why);
  };
  auto guarded_step = [&](std::span<const ParamRef<float>> params, AdamState<float>& opt,
                          std::int64_t step) {
    try {
      adam_step<float>(params, opt);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::non_finite) throw;
      diverge(step, e.what());
    }
  };

  const auto gparams = trainable_parameters(run.generator);
  const auto dparams = trainable_parameters(run.discriminator);
  Recorder recorder(run.log, hooks, cfg.record_wall_clock);
  BatchOrder x_order(dehazed_pool.size(), cfg.seed + 11);
  BatchOrder y_order(target_pool.size(), cfg.seed + 23);
  const int bs = cfg.batch_size_refine;
  const int crop_n = std::max(2, std::min(bs, 2));

  // Content phase.
  if (!resumed) {
    std::deque<double> history;
    for (int s = 0; s < cfg.refine_content_steps; ++s) {
      const std::int64_t step = s + 1;
      const Tensor<float> x = stack_pool<float>(dehazed_pool, x_order.batch(s, bs));
      double spot = -1.0;
      if (s == 0 && cfg.gradient_spot_check) {
        const Tensor<float> small = crop(x, crop_n, kSpotCheckCrop);
        const Tensor<double> small_d = small.cast<double>();
        spot = spot_check<GeneratorNet>(
            run.generator,
            [&](GeneratorNet<double>& g, bool grad) {
              return content_objective(g, small_d, cfg, grad).total;
            },
            "refine content", cfg.spot_check_tolerance);
      }
      const LossReport report = content_objective(run.generator, x, cfg, true);
      if (!std::isfinite(report.total)) diverge(step, "non-finite content loss");
      guarded_step(gparams, run.generator_optimizer, step);
      run.content_steps_run = static_cast<int>(step);

      bool stop = false;
      history.push_back(report.total);
      const auto w = static_cast<std::size_t>(cfg.early_stop_window);
      if (history.size() > 2 * w) history.pop_front();
      if (cfg.early_stop && history.size() == 2 * w) {
        const double prev = std::accumulate(history.begin(), history.begin() + static_cast<std::ptrdiff_t>(w), 0.0) / static_cast<double>(w);
        const double now = std::accumulate(history.begin() + static_cast<std::ptrdiff_t>(w), history.end(), 0.0) / static_cast<double>(w);
        stop = prev - now < cfg.early_stop_min_improvement * prev;
      }
      const bool last = stop || step == cfg.refine_content_steps;
      LogRecord& rec = recorder.add("refine-content", step, report);
      if (spot >= 0.0) rec.note = "gradient spot check max relative error " + std::to_string(spot);
      if (stop) rec.note = "early stop: moving average improved by less than " + std::to_string(cfg.early_stop_min_improvement * 100.0) + "%";
      if (due(step, cfg.validate_every) || last) set_refine_validation(rec, run.generator, validation_pool, cfg.ssim);
      recorder.flush_last();
      if (due(step, cfg.checkpoint_every) && !last && hooks.on_checkpoint) hooks.on_checkpoint(snapshot(), step_tag(step));
      if (stop) break;
    }
  }

  // Adversarial phase: one discriminator step then one generator step.
  int saturated = 0;
  const std::int64_t offset = run.content_steps_run;
  const int done_before = run.adversarial_steps_run;
  for (int s = 0; s < cfg.refine_adversarial_steps; ++s) {
    const std::int64_t k = done_before + s;  // adversarial iteration index
    const std::int64_t step = offset + k + 1;
    const Tensor<float> real = stack_pool<float>(target_pool, y_order.batch(k, bs));
    const Tensor<float> x_d = stack_pool<float>(dehazed_pool, x_order.batch(2 * k, bs));
    const Tensor<float> x_g = stack_pool<float>(dehazed_pool, x_order.batch(2 * k + 1, bs));

    double spot = -1.0;
    if (s == 0 && cfg.gradient_spot_check) {
      const Tensor<float> small_x = crop(x_g, crop_n, kSpotCheckCrop);
      const Tensor<float> small_y = crop(real, crop_n, kSpotCheckCrop);
      const Tensor<double> small_xd = small_x.cast<double>();
      const Tensor<double> small_yd = small_y.cast<double>();
      const DiscriminatorNet<double> disc_d = run.discriminator.cast_network<double>();
      const double g_err = spot_check<GeneratorNet>(
          run.generator,
          [&](GeneratorNet<double>& g, bool grad) {
            DiscriminatorNet<double> d = disc_d;
            return generator_objective(g, d, small_xd, cfg, grad).total;
          },
          "refine generator", cfg.spot_check_tolerance);
      GeneratorNet<float> gen_f = run.generator;
      const Tensor<float> fake = gen_f.infer(small_x);
      const Tensor<double> fake_d = fake.cast<double>();
      const double d_err = spot_check<DiscriminatorNet>(
          run.discriminator,
          [&](DiscriminatorNet<double>& d, bool grad) {
            return discriminator_objective(d, small_yd, fake_d, grad).report.total;
          },
          "refine discriminator", cfg.spot_check_tolerance);
      spot = std::max(g_err, d_err);
    }

    const Tensor<float> fake = clamp(run.generator.forward(x_d, Mode::train), 0.0f, 1.0f);
    const DiscriminatorStep dstep = discriminator_objective(run.discriminator, real, fake, true);
    if (!std::isfinite(dstep.report.total)) diverge(step, "non-finite discriminator loss");
    guarded_step(dparams, run.discriminator_optimizer, step);

    const LossReport greport = generator_objective(run.generator, run.discriminator, x_g, cfg, true);
    if (!std::isfinite(greport.total)) diverge(step, "non-finite generator loss");
    guarded_step(gparams, run.generator_optimizer, step);
    run.adversarial_steps_run = static_cast<int>(k + 1);

    LossReport combined = greport;
    for (const auto& c : dstep.report.components) combined.components.push_back(c);
    combined.components.emplace_back("d_total", dstep.report.total);
    combined.components.emplace_back("d_saturation", dstep.saturation);
    LogRecord& rec = recorder.add("refine-adversarial", step, combined);
    rec.total = greport.total;
    if (spot >= 0.0) rec.note = "gradient spot check max relative error " + std::to_string(spot);
    saturated = dstep.saturation > 0.499 ? saturated + 1 : 0;
    if (saturated == cfg.saturation_window) {
      rec.note = "warning: discriminator saturated (mean |D - 0.5| > 0.499) for " +
                 std::to_string(saturated) + " consecutive steps";
    }
    const bool last = s + 1 == cfg.refine_adversarial_steps;
    if (due(step, cfg.validate_every) || last) set_refine_validation(rec, run.generator, validation_pool, cfg.ssim);
    recorder.flush_last();
    if (due(step, cfg.checkpoint_every) && !last && hooks.on_checkpoint) hooks.on_checkpoint(snapshot(), step_tag(step));
  }

  run.checkpoint = snapshot();
  return run;
}

AblationStudy run_ablation_study(const Dataset<float>& data, const TrainConfig& config) {
  TrainConfig full_cfg = config;
  full_cfg.ablation_no_transmission = false;
  AblationStudy study{train_dehazing(data, full_cfg), train_ablation(data, config), {}, -1};
  const auto full = study.full.log.with_validation();
  const auto abl = study.ablation.log.with_validation();
  auto val_mse = [](const LogRecord* r) {
    for (const auto& [k, v] : r->validation) {
      if (k == "val_mse") return v;
    }
    return std::nan("");
  };
  std::string csv = "step,full_val_mse,ablation_val_mse\n";
  const std::size_t n = std::min(full.size(), abl.size());
  char line[128];
  for (std::size_t i = 0; i < n; ++i) {
    std::snprintf(line, sizeof(line), "%lld,%.10g,%.10g\n", static_cast<long long>(full[i]->step),
                  val_mse(full[i]), val_mse(abl[i]));
    csv += line;
  }
  if (n > 0) {
    const double target = val_mse(abl[n - 1]);
    for (std::size_t i = 0; i < n; ++i) {
      if (val_mse(full[i]) <= target) {
        study.full_steps_to_ablation_final = full[i]->step;
        break;
      }
    }
  }
  study.curves_csv = std::move(csv);
  return study;
}

ValidationMetrics validate_dehazing(const DehazingModel<float>& model,
                                    std::span<const Sample<float>> split, const SsimConfig& ssim) {
  require(!split.empty(), ErrorCode::invalid_argument, "validation split is empty");
  ValidationMetrics m;
  for (const auto& s : split) {
    const Tensor<float> dehazed = run_pipeline(s.hazy, model).dehazed;
    const double mse = mse_metric(dehazed, s.clear);
    m.mse += mse;
    m.psnr += psnr_from_mse(mse, 1.0);
    m.ssim += ssim_metric(dehazed, s.clear, ssim);
  }
  const double n = static_cast<double>(split.size());
  m.mse /= n;
  m.psnr /= n;
  m.ssim /= n;
  return m;
}

PipelineOutput run_pipeline(const Tensor<float>& hazy, const DehazingModel<float>& model,
                            const GeneratorNet<float>* generator) {
  const auto out = model.infer(hazy);
  PipelineOutput p;
  p.transmission = out.fine;
  p.dehazed = clamp(out.dehazed, 0.0f, 1.0f);
  if (generator) p.refined = clamp(generator->infer(p.dehazed), 0.0f, 1.0f);
  return p;
}

Pipeline load_pipeline(const Checkpoint& ckpt, bool with_refinement) {
  require(ckpt.metadata.count("format") && ckpt.meta("format") == "drnet",
          ErrorCode::checkpoint_corrupt, "checkpoint lacks drnet metadata");
  const ArchitectureConfig arch = get_arch(ckpt);
  Pipeline p{DehazingModel<float>(arch, ckpt.meta("model.transmission") == "1"), std::nullopt};
  load_network(ckpt, p.model);
  if (with_refinement) {
    require(ckpt.find("generator.conv1.kernel") != nullptr, ErrorCode::checkpoint_missing,
            "stage refine needs a refinement checkpoint (no generator weights found)");
    p.generator.emplace(arch);
    load_network(ckpt, *p.generator);
  }
  return p;
}

std::vector<Tensor<float>> dehaze_all(const DehazingModel<float>& model,
                                      std::span<const Tensor<float>> hazy) {
  std::vector<Tensor<float>> out;
  out.reserve(hazy.size());
  for (const auto& h : hazy) out.push_back(run_pipeline(h, model).dehazed);
  return out;
}

std::vector<Tensor<float>> make_target_pool(std::uint64_t seed, int count, int height, int width) {
  std::vector<Tensor<float>> out;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed + kTargetSeedOffset + static_cast<std::uint64_t>(i));
    out.push_back(vivid_boost(generate_scene<float>(rng, height, width).clear));
  }
  return out;
}

std::vector<Tensor<float>> make_heldout_hazy(std::uint64_t seed, int count, int height, int width) {
  std::vector<Tensor<float>> out;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed + kHeldoutSeedOffset + static_cast<std::uint64_t>(i));
    const Scene<float> scene = generate_scene<float>(rng, height, width);
    out.push_back(render_sample(scene, sample_haze_params(rng)).hazy);
  }
  return out;
}

}  // namespace drnet
