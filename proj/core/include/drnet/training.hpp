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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "drnet/checkpoint.hpp"
#include "drnet/haze_model.hpp"
#include "drnet/losses.hpp"
#include "drnet/networks.hpp"

namespace drnet {

struct TrainConfig {
  std::uint64_t seed = 1;
  AdamConfig adam;
  int batch_size_dehaze = 4;
  int batch_size_refine = 4;
  int dehaze_steps = 2000;
  int refine_content_steps = 500;
  int refine_adversarial_steps = 500;
  double transmission_loss_weight = 1.0;
  double dehaze_loss_weight = 1.0;
  double adversarial_weight = kAdversarialWeight;
  bool ablation_no_transmission = false;
  int validate_every = 250;  // 0 validates only at the end of each stage
  int checkpoint_every = 0;  // 0 keeps only the final checkpoint
  /// Content phase of refinement stops once the moving average over this many
  /// steps improves on the previous window by less than the given fraction.
  bool early_stop = true;
  int early_stop_window = 100;
  double early_stop_min_improvement = 1e-3;
  /// Consecutive adversarial steps with mean |D - 0.5| > 0.499 before warning.
  int saturation_window = 100;
  /// Compares the first step's analytic gradient to double-precision central
  /// differences on a cropped batch.
  bool gradient_spot_check = true;
  double spot_check_tolerance = 1e-3;
  bool record_wall_clock = false;
  SsimConfig ssim;
  ArchitectureConfig arch;

  void validate() const;
};

struct LogRecord {
  std::string stage;
  std::int64_t step = 0;
  std::vector<std::pair<std::string, double>> losses;
  double total = 0.0;
  std::vector<std::pair<std::string, double>> validation;
  std::string note;
  double wall_seconds = -1.0;  // negative when not recorded
};

struct TrainLog {
  std::vector<LogRecord> records;

  /// One JSON object per line.
  std::string to_jsonl() const;
  void append(const TrainLog& other);
  std::vector<const LogRecord*> with_validation() const;
};

struct TrainHooks {
  /// Periodic checkpoints ("step-000250") and, before a divergence error, the
  /// last finite state ("last-good").
  std::function<void(const Checkpoint&, const std::string& tag)> on_checkpoint;
  std::function<void(const LogRecord&)> on_record;
};

struct ValidationMetrics {
  double mse = 0.0;   // unit scale
  double psnr = 0.0;  // mean of per-image values
  double ssim = 0.0;
};

struct DehazeRun {
  DehazingModel<float> model;
  AdamState<float> optimizer;
  TrainLog log;
  Checkpoint checkpoint;
};

/// Joint training of the transmission and haze removal networks on the sum of
/// the two objectives. With `resume`, weights, optimizer moments and the step
/// counter are restored and `dehaze_steps` further steps are taken.
DehazeRun train_dehazing(const Dataset<float>& data, const TrainConfig& config,
                         const Checkpoint* resume = nullptr, const TrainHooks& hooks = {});

/// As train_dehazing with the transmission networks removed: the haze removal
/// network sees only the hazy image.
DehazeRun train_ablation(const Dataset<float>& data, const TrainConfig& config,
                         const Checkpoint* resume = nullptr, const TrainHooks& hooks = {});

struct RefineRun {
  GeneratorNet<float> generator;
  DiscriminatorNet<float> discriminator;
  AdamState<float> generator_optimizer;
  AdamState<float> discriminator_optimizer;
  TrainLog log;
  Checkpoint checkpoint;
  int content_steps_run = 0;
  int adversarial_steps_run = 0;
};

/// Content phase then alternating discriminator/generator steps. Pools hold
/// single images (1,3,H,W). `validation_pool` scores the generator against
/// its own inputs. Network records from `base` (the dehazing checkpoint) are
/// carried into the result; a refinement checkpoint as `base` resumes the
/// adversarial phase.
RefineRun train_refinement(std::span<const Tensor<float>> dehazed_pool,
                           std::span<const Tensor<float>> target_pool,
                           std::span<const Tensor<float>> validation_pool,
                           const TrainConfig& config, const Checkpoint* base = nullptr,
                           const TrainHooks& hooks = {});

struct AblationStudy {
  DehazeRun full;
  DehazeRun ablation;
  /// step,full_val_mse,ablation_val_mse
  std::string curves_csv;
  /// First validated step at which the full model reached the ablation's final
  /// validation MSE, or -1.
  std::int64_t full_steps_to_ablation_final = -1;
};

/// Trains the full model and the ablation from the same seed and dataset.
AblationStudy run_ablation_study(const Dataset<float>& data, const TrainConfig& config);

ValidationMetrics validate_dehazing(const DehazingModel<float>& model,
                                    std::span<const Sample<float>> split, const SsimConfig& ssim);

struct PipelineOutput {
  Tensor<float> transmission;  // fine map; empty for an ablation model
  Tensor<float> dehazed;       // clamped to [0, 1]
  Tensor<float> refined;       // empty unless a generator is given
};

PipelineOutput run_pipeline(const Tensor<float>& hazy, const DehazingModel<float>& model,
                            const GeneratorNet<float>* generator = nullptr);

struct Pipeline {
  DehazingModel<float> model;
  std::optional<GeneratorNet<float>> generator;
};

/// Rebuilds the networks recorded in a checkpoint. `with_refinement` requires
/// generator weights.
Pipeline load_pipeline(const Checkpoint& ckpt, bool with_refinement);

/// Dehazer outputs (clamped) for each hazy image.
std::vector<Tensor<float>> dehaze_all(const DehazingModel<float>& model,
                                      std::span<const Tensor<float>> hazy);

/// Vivid-domain targets: boosted clear procedural scenes from seeds disjoint
/// from the dataset's.
std::vector<Tensor<float>> make_target_pool(std::uint64_t seed, int count, int height, int width);

/// Fresh procedural hazy images, one rendering per scene, disjoint from the
/// dataset's scenes.
std::vector<Tensor<float>> make_heldout_hazy(std::uint64_t seed, int count, int height, int width);

}  // namespace drnet
