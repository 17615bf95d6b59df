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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "drnet/checkpoint.hpp"
#include "drnet/error.hpp"
#include "drnet/training.hpp"

namespace drnet {
namespace {

DatasetSpec tiny_spec() {
  DatasetSpec spec;
  spec.seed = 3;
  spec.train_scenes = 3;
  spec.val_scenes = 1;
  spec.samples_per_scene = 2;
  spec.height = 16;
  spec.width = 16;
  return spec;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.seed = 5;
  cfg.batch_size_dehaze = 2;
  cfg.batch_size_refine = 2;
  cfg.dehaze_steps = 4;
  cfg.refine_content_steps = 3;
  cfg.refine_adversarial_steps = 3;
  cfg.validate_every = 2;
  cfg.early_stop = false;
  cfg.arch.removal_blocks = 1;
  cfg.arch.removal_width = 8;
  cfg.arch.generator_width = 8;
  return cfg;
}

const Dataset<float>& tiny_data() {
  static const Dataset<float> data = build_dataset<float>(tiny_spec());
  return data;
}

std::vector<Tensor<float>> hazy_of(const std::vector<Sample<float>>& s) {
  std::vector<Tensor<float>> out;
  for (const auto& x : s) out.push_back(x.hazy);
  return out;
}

TEST(TrainConfig, RejectsInvalidSettings) {
  TrainConfig cfg = tiny_config();
  cfg.batch_size_dehaze = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = tiny_config();
  cfg.adam.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), Error);
  EXPECT_NO_THROW(tiny_config().validate());
}

TEST(Dehazing, RunsAreDeterministic) {
  const auto a = train_dehazing(tiny_data(), tiny_config());
  const auto b = train_dehazing(tiny_data(), tiny_config());
  EXPECT_EQ(a.log.to_jsonl(), b.log.to_jsonl());
  EXPECT_EQ(serialize_checkpoint(a.checkpoint), serialize_checkpoint(b.checkpoint));
  EXPECT_EQ(a.checkpoint.meta("step"), "4");
  EXPECT_EQ(a.log.records.size(), 4u);
  EXPECT_EQ(a.log.with_validation().size(), 2u);
  EXPECT_NE(a.log.records.front().note.find("spot check"), std::string::npos);
}

TEST(Dehazing, LoggedTotalIsSumOfComponents) {
  const auto run = train_dehazing(tiny_data(), tiny_config());
  for (const auto& r : run.log.records) {
    ASSERT_EQ(r.losses.size(), 5u);
    double sum = 0;
    for (const auto& [k, v] : r.losses) sum += v;
    EXPECT_NEAR(r.total, sum, 1e-9 * std::max(1.0, std::abs(sum)));
    EXPECT_TRUE(std::isfinite(r.total));
  }
  EXPECT_EQ(run.log.records.front().losses.front().first, "cs_mse");
}

TEST(Dehazing, ResumeContinuesStepNumbering) {
  TrainConfig cfg = tiny_config();
  cfg.dehaze_steps = 2;
  const auto first = train_dehazing(tiny_data(), cfg);
  const auto second = train_dehazing(tiny_data(), cfg, &first.checkpoint);
  ASSERT_FALSE(second.log.records.empty());
  EXPECT_EQ(second.log.records.front().step, 3);
  EXPECT_EQ(second.checkpoint.meta("step"), "4");
  EXPECT_EQ(second.optimizer.step, 4);
}

TEST(Ablation, DiffersFromFullModel) {
  const auto full = train_dehazing(tiny_data(), tiny_config());
  const auto abl = train_ablation(tiny_data(), tiny_config());
  EXPECT_NE(full.log.to_jsonl(), abl.log.to_jsonl());
  EXPECT_EQ(abl.log.records.front().losses.size(), 2u);
  EXPECT_FALSE(abl.model.uses_transmission());
  EXPECT_EQ(abl.checkpoint.meta("stage"), "ablation");

  const auto study = run_ablation_study(tiny_data(), tiny_config());
  EXPECT_EQ(study.curves_csv.substr(0, study.curves_csv.find('\n')),
            "step,full_val_mse,ablation_val_mse");
  EXPECT_EQ(study.full.log.to_jsonl(), full.log.to_jsonl());
}

class Refinement : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    base_ = new DehazeRun(train_dehazing(tiny_data(), tiny_config()));
    pool_ = dehaze_all(base_->model, hazy_of(tiny_data().train));
    targets_ = make_target_pool(11, 4, 16, 16);
    val_ = dehaze_all(base_->model, hazy_of(tiny_data().validation));
  }
  static void TearDownTestSuite() { delete base_; }
  static DehazeRun* base_;
  static std::vector<Tensor<float>> pool_, targets_, val_;
};
DehazeRun* Refinement::base_ = nullptr;
std::vector<Tensor<float>> Refinement::pool_, Refinement::targets_, Refinement::val_;

TEST_F(Refinement, ContentPhaseLeavesDiscriminatorUntouched) {
  TrainConfig cfg = tiny_config();
  cfg.refine_adversarial_steps = 0;
  const auto run = train_refinement(pool_, targets_, val_, cfg, &base_->checkpoint);
  DiscriminatorNet<float> fresh;
  GeneratorNet<float> gen(cfg.arch);
  std::mt19937_64 init_rng(cfg.seed + 1);
  init_weights(gen, init_rng);
  init_weights(fresh, init_rng);
  const auto a = trainable_parameters(fresh);
  const auto b = trainable_parameters(const_cast<DiscriminatorNet<float>&>(run.discriminator));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].tensor, *b[i].tensor) << a[i].name;
  EXPECT_EQ(run.content_steps_run, 3);
  EXPECT_EQ(run.adversarial_steps_run, 0);
  for (const auto& r : run.log.records) {
    EXPECT_EQ(r.stage, "refine-content");
    double sum = 0;
    for (const auto& [k, v] : r.losses) sum += v;
    EXPECT_NEAR(r.total, sum, 1e-9);
  }
  // the dehazing networks ride along in the refinement checkpoint
  EXPECT_NE(run.checkpoint.find("removal.out.kernel"), nullptr);
}

TEST_F(Refinement, ZeroAdversarialStepsEqualsContentEnd) {
  TrainConfig cfg = tiny_config();
  cfg.refine_adversarial_steps = 0;
  const auto a = train_refinement(pool_, targets_, val_, cfg, &base_->checkpoint);
  const auto b = train_refinement(pool_, targets_, val_, cfg, &base_->checkpoint);
  EXPECT_EQ(serialize_checkpoint(a.checkpoint), serialize_checkpoint(b.checkpoint));
  cfg.refine_adversarial_steps = 2;
  const auto c = train_refinement(pool_, targets_, val_, cfg, &base_->checkpoint);
  const auto pa = trainable_parameters(const_cast<GeneratorNet<float>&>(a.generator));
  const auto pc = trainable_parameters(const_cast<GeneratorNet<float>&>(c.generator));
  bool moved = false;
  for (std::size_t i = 0; i < pa.size(); ++i) moved = moved || !(*pa[i].tensor == *pc[i].tensor);
  EXPECT_TRUE(moved);
}

TEST_F(Refinement, AdversarialPhaseIsFiniteAndResumable) {
  const TrainConfig cfg = tiny_config();
  const auto run = train_refinement(pool_, targets_, val_, cfg, &base_->checkpoint);
  EXPECT_EQ(run.adversarial_steps_run, 3);
  int adversarial = 0;
  for (const auto& r : run.log.records) {
    EXPECT_TRUE(std::isfinite(r.total));
    for (const auto& [k, v] : r.losses) EXPECT_TRUE(std::isfinite(v)) << k;
    if (r.stage == "refine-adversarial") ++adversarial;
  }
  EXPECT_EQ(adversarial, 3);
  const auto more = train_refinement(pool_, targets_, val_, cfg, &run.checkpoint);
  EXPECT_EQ(more.adversarial_steps_run, 6);
  for (const auto& r : more.log.records) EXPECT_EQ(r.stage, "refine-adversarial");
}

TEST_F(Refinement, PipelineStagesAndRepeatability) {
  const auto hazy = tiny_data().validation.front().hazy;
  const auto out = run_pipeline(hazy, base_->model);
  EXPECT_TRUE(out.refined.empty());
  EXPECT_EQ(out.transmission.shape(), (Shape{1, 1, 16, 16}));
  for (float v : out.dehazed.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_EQ(run_pipeline(hazy, base_->model).dehazed, out.dehazed);

  TrainConfig cfg = tiny_config();
  cfg.refine_adversarial_steps = 1;
  const auto run = train_refinement(pool_, targets_, val_, cfg, &base_->checkpoint);
  const Pipeline p = load_pipeline(run.checkpoint, true);
  ASSERT_TRUE(p.generator.has_value());
  const auto refined = run_pipeline(hazy, p.model, &*p.generator);
  EXPECT_EQ(refined.refined.shape(), hazy.shape());
  EXPECT_EQ(refined.dehazed, out.dehazed);
  EXPECT_THROW(load_pipeline(base_->checkpoint, true), Error);
}

TEST(Pools, DisjointAndDeterministic) {
  const auto a = make_target_pool(1, 2, 16, 16);
  EXPECT_EQ(a.front(), make_target_pool(1, 2, 16, 16).front());
  EXPECT_EQ(a.front().shape(), (Shape{1, 3, 16, 16}));
  const auto h = make_heldout_hazy(1, 2, 16, 16);
  EXPECT_FALSE(h.front() == a.front());
  EXPECT_FALSE(h.front() == tiny_data().train.front().hazy);
}

}  // namespace
}  // namespace drnet
