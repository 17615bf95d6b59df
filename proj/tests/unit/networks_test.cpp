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
#include <filesystem>
#include <fstream>
#include <random>

#include "drnet/checkpoint.hpp"
#include "drnet/error.hpp"
#include "drnet/losses.hpp"
#include "drnet/networks.hpp"
#include "drnet/numerics/gradcheck.hpp"
#include "support/oracles.hpp"

namespace drnet {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

template <template <typename> class Net, typename T>
void zero_weights(Net<T>& net) {
  net.visit([](const std::string&, Tensor<T>& t, ParamRole role) {
    if (role == ParamRole::kernel || role == ParamRole::bias) t.fill(T(0));
  });
}

template <template <typename> class Net, typename T>
std::size_t parameter_count(Net<T>& net) {
  std::size_t n = 0;
  for (const auto& p : trainable_parameters(net)) n += p.tensor->numel();
  return n;
}

GradcheckOptions sampled(std::uint64_t seed) {
  GradcheckOptions o;
  o.step = 1e-5;
  o.floor = 1e-7;
  o.max_entries_per_param = 6;
  o.seed = seed;
  return o;
}

TEST(Architecture, LayerShapes) {
  CoarseNet<float> coarse;
  EXPECT_EQ(coarse.stages[0].conv.kernel.shape(), (Shape{16, 3, 11, 11}));
  EXPECT_EQ(coarse.stages[1].conv.kernel.shape(), (Shape{16, 16, 9, 9}));
  EXPECT_EQ(coarse.stages[2].conv.kernel.shape(), (Shape{16, 16, 7, 7}));
  EXPECT_EQ(coarse.stages[3].conv.kernel.shape(), (Shape{1, 16, 5, 5}));
  FineNet<float> fine;
  EXPECT_EQ(fine.stages[0].conv.kernel.shape(), (Shape{16, 3, 7, 7}));
  EXPECT_EQ(fine.stages[1].conv.in_channels(), 17);
  EXPECT_EQ(fine.stages[2].conv.kernel_size(), 3);
  EXPECT_EQ(fine.stages[3].conv.kernel.shape(), (Shape{1, 16, 1, 1}));

  HazeRemovalNet<float> removal;
  EXPECT_EQ(removal.in_channels(), 4);
  ASSERT_EQ(removal.blocks.size(), 3u);
  EXPECT_EQ(removal.blocks[0][0].conv.in_channels(), 4);
  EXPECT_EQ(removal.blocks[1][0].conv.in_channels(), 36);
  EXPECT_EQ(removal.blocks[2][2].conv.out_channels(), 32);
  EXPECT_EQ(removal.output.conv.out_channels(), 3);
  EXPECT_EQ(HazeRemovalNet<float>({}, 3).blocks[0][0].conv.in_channels(), 3);

  GeneratorNet<float> gen;
  EXPECT_EQ(gen.depth(), 10);
  EXPECT_EQ(gen.norms.size(), 9u);
  EXPECT_EQ(gen.convs.back().out_channels(), 3);
  DiscriminatorNet<float> disc;
  EXPECT_EQ(disc.convs[3].out_channels(), 256);
  EXPECT_EQ(disc.convs[0].stride, 2);
}

TEST(Architecture, ForwardShapesAndRanges) {
  std::mt19937_64 rng(1);
  DehazingModel<float> model;
  init_weights(model, rng);
  const auto hazy = random_tensor<float>(Shape{2, 3, 20, 24}, rng, 0, 1);
  const auto out = model.infer(hazy);
  EXPECT_EQ(out.coarse.shape(), (Shape{2, 1, 20, 24}));
  EXPECT_EQ(out.fine.shape(), (Shape{2, 1, 20, 24}));
  EXPECT_EQ(out.residual.shape(), hazy.shape());
  for (float t : out.fine.data()) {
    EXPECT_GT(t, 0.0f);
    EXPECT_LT(t, 1.0f);
  }

  GeneratorNet<float> gen;
  init_weights(gen, rng);
  const auto refined = gen.forward(hazy, Mode::train);
  EXPECT_EQ(refined.shape(), hazy.shape());
  for (float v : refined.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }

  DiscriminatorNet<float> disc;
  init_weights(disc, rng);
  const auto scores = disc.forward(random_tensor<float>(Shape{8, 3, 32, 48}, rng, 0, 1), Mode::train);
  EXPECT_EQ(scores.shape(), (Shape{8, 1, 1, 1}));
  for (float s : scores.data()) {
    EXPECT_GT(s, 0.0f);
    EXPECT_LT(s, 1.0f);
  }
  try {
    disc.infer(Tensor<float>(Shape{1, 3, 20, 32}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape_mismatch);
    EXPECT_NE(std::string(e.what()).find("16"), std::string::npos);
  }
}

TEST(Architecture, ZeroFinalLayers) {
  CoarseNet<double> coarse;
  std::mt19937_64 rng(2);
  init_weights(coarse, rng);
  coarse.stages[3].conv.kernel.fill(0.0);
  const auto t = coarse.infer(random_tensor<double>(Shape{1, 3, 9, 9}, rng, 0, 1));
  for (double v : t.data()) EXPECT_EQ(v, 0.5);

  DiscriminatorNet<double> disc;
  init_weights(disc, rng);
  disc.head.kernel.fill(0.0);
  EXPECT_EQ(disc.infer(random_tensor<double>(Shape{2, 3, 16, 16}, rng, 0, 1))[1], 0.5);
}

TEST(Architecture, ResidualIdentityWithZeroWeights) {
  DehazingModel<float> model;
  zero_weights(model);
  std::mt19937_64 rng(3);
  const auto hazy = random_tensor<float>(Shape{2, 3, 12, 16}, rng, 0, 1);
  const auto out = model.infer(hazy);
  for (float r : out.residual.data()) EXPECT_EQ(r, 0.0f);
  EXPECT_EQ(out.dehazed, hazy);
}

TEST(Architecture, GeneratorSkipReachesSymmetricLayer) {
  std::mt19937_64 rng(4);
  GeneratorNet<double> gen;
  init_weights(gen, rng);
  for (int j = 1; j < 8; ++j) {
    gen.convs[static_cast<std::size_t>(j)].kernel.fill(0.0);
    gen.convs[static_cast<std::size_t>(j)].bias.fill(0.0);
  }
  const auto x = random_tensor<double>(Shape{2, 3, 8, 8}, rng, 0, 1);
  gen.forward(x, Mode::train);
  double energy = 0;
  for (double v : gen.cached_layer_input(9).data()) energy += v * v;
  EXPECT_GT(energy, 0.0);
  for (double v : gen.cached_layer_input(8).data()) EXPECT_EQ(v, 0.0);

  gen.convs[0].kernel.fill(0.0);
  gen.forward(x, Mode::train);
  for (double v : gen.cached_layer_input(9).data()) EXPECT_EQ(v, 0.0);
}

TEST(Initialization, DeterministicWithHeStatistics) {
  std::mt19937_64 a(5), b(5);
  GeneratorNet<float> g1, g2;
  init_weights(g1, a);
  init_weights(g2, b);
  const auto p1 = trainable_parameters(g1);
  const auto p2 = trainable_parameters(g2);
  for (std::size_t i = 0; i < p1.size(); ++i) EXPECT_EQ(*p1[i].tensor, *p2[i].tensor);
  for (float v : g1.convs[2].bias.data()) EXPECT_EQ(v, 0.0f);
  for (float v : g1.norms[0].gamma.data()) EXPECT_EQ(v, 1.0f);
  for (float v : g1.norms[0].beta.data()) EXPECT_EQ(v, 0.0f);

  Tensor<double> kernel(Shape{35, 32, 3, 3});
  std::mt19937_64 rng(6);
  init_tensor(kernel, ParamRole::kernel, rng);
  ASSERT_GE(kernel.numel(), 10000u);
  double mean = 0, sq = 0;
  for (double v : kernel.data()) mean += v;
  mean /= static_cast<double>(kernel.numel());
  for (double v : kernel.data()) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(kernel.numel()));
  const double target = std::sqrt(2.0 / (32 * 9));
  EXPECT_LT(std::abs(sd - target) / target, 0.05);
}

TEST(Gradients, CoarseNet) {
  std::mt19937_64 rng(7);
  CoarseNet<double> net;
  init_weights(net, rng);
  const auto x = random_tensor<double>(Shape{1, 3, 16, 16}, rng, 0, 1);
  const auto t = random_tensor<double>(Shape{1, 1, 16, 16}, rng, 0.2, 1);
  const auto params = trainable_parameters(net);
  const Objective<double> f = [&](bool g) {
    if (g) zero_all_grads(net);
    const auto y = net.forward(x);
    const auto l = mse_loss(y, t);
    if (g) net.backward(l.grad);
    return l.value;
  };
  EXPECT_LT(gradcheck(f, std::span<const ParamRef<double>>(params), sampled(1)).max_rel_error, 1e-3);
}

TEST(Gradients, FineNetReachesCoarseNet) {
  std::mt19937_64 rng(8);
  CoarseNet<double> coarse;
  FineNet<double> fine;
  init_weights(coarse, rng);
  init_weights(fine, rng);
  const auto x = random_tensor<double>(Shape{1, 3, 16, 16}, rng, 0, 1);
  const auto t = random_tensor<double>(Shape{1, 1, 16, 16}, rng, 0.2, 1);
  auto params = trainable_parameters(coarse);
  for (const auto& p : trainable_parameters(fine)) params.push_back(p);
  const Objective<double> f = [&](bool g) {
    if (g) {
      zero_all_grads(coarse);
      zero_all_grads(fine);
    }
    const auto c = coarse.forward(x);
    const auto y = fine.forward(x, c);
    const auto l = ssim_loss(y, t);
    if (g) coarse.backward(fine.backward(l.grad).coarse);
    return l.value;
  };
  EXPECT_LT(gradcheck(f, std::span<const ParamRef<double>>(params), sampled(2)).max_rel_error, 1e-3);
  double coarse_energy = 0;
  for (double v : std::as_const(coarse.stages[0].conv.kernel).grad()) coarse_energy += v * v;
  EXPECT_GT(coarse_energy, 0.0);
}

TEST(Gradients, HazeRemovalNet) {
  std::mt19937_64 rng(9);
  HazeRemovalNet<double> net;
  init_weights(net, rng);
  const auto hazy = random_tensor<double>(Shape{1, 3, 16, 16}, rng, 0, 1);
  const auto t = random_tensor<double>(Shape{1, 1, 16, 16}, rng, 0.2, 1);
  const auto clear = random_tensor<double>(hazy.shape(), rng, 0, 1);
  const auto params = trainable_parameters(net);
  const Objective<double> f = [&](bool g) {
    if (g) zero_all_grads(net);
    const auto r = net.forward(hazy, t);
    const auto l = d_total(r, hazy, clear);
    if (g) net.backward(l.grad_residual);
    return l.report.total;
  };
  EXPECT_LT(gradcheck(f, std::span<const ParamRef<double>>(params), sampled(3)).max_rel_error, 1e-3);
}

TEST(Gradients, GeneratorTrainMode) {
  std::mt19937_64 rng(10);
  GeneratorNet<double> net;
  init_weights(net, rng);
  const auto x = random_tensor<double>(Shape{2, 3, 16, 16}, rng, 0, 1);
  const auto params = trainable_parameters(net);
  const Objective<double> f = [&](bool g) {
    if (g) zero_all_grads(net);
    const auto y = net.forward(x, Mode::train);
    const auto l = rf_content(y, x);
    if (g) net.backward(l.grad_refined);
    return l.report.total;
  };
  EXPECT_LT(gradcheck(f, std::span<const ParamRef<double>>(params), sampled(4)).max_rel_error, 1e-3);
}

TEST(Gradients, DiscriminatorEvalMode) {
  std::mt19937_64 rng(11);
  DiscriminatorNet<double> net;
  init_weights(net, rng);
  const auto real = random_tensor<double>(Shape{1, 3, 16, 16}, rng, 0, 1);
  const auto params = trainable_parameters(net);
  const Objective<double> f = [&](bool g) {
    if (g) zero_all_grads(net);
    const auto d = net.forward(real, Mode::eval);
    const auto l = adversarial_losses(d, Tensor<double>());
    if (g) net.backward(l.d_grad_real);
    return l.discriminator;
  };
  EXPECT_LT(gradcheck(f, std::span<const ParamRef<double>>(params), sampled(5)).max_rel_error, 1e-3);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("drnet_ckpt_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(CheckpointTest, RoundTripIsByteIdenticalAndExact) {
  std::mt19937_64 rng(12);
  DehazingModel<float> model;
  init_weights(model, rng);
  Checkpoint ckpt;
  ckpt.metadata["stage"] = "dehaze";
  store_network(ckpt, model);
  save_checkpoint(ckpt, dir_ / "a.ckpt");
  const Checkpoint loaded = load_checkpoint(dir_ / "a.ckpt");
  save_checkpoint(loaded, dir_ / "b.ckpt");
  std::ifstream fa(dir_ / "a.ckpt", std::ios::binary), fb(dir_ / "b.ckpt", std::ios::binary);
  const std::string a((std::istreambuf_iterator<char>(fa)), {});
  const std::string b((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_EQ(a, b);
  EXPECT_EQ(loaded.meta("stage"), "dehaze");

  DehazingModel<float> restored;
  load_network(loaded, restored);
  const auto x = random_tensor<float>(Shape{1, 3, 12, 12}, rng, 0, 1);
  EXPECT_EQ(model.infer(x).dehazed, restored.infer(x).dehazed);
  EXPECT_EQ(loaded.records.size(), ckpt.records.size());
}

TEST_F(CheckpointTest, MismatchedArchitectureNamesParameter) {
  DehazingModel<float> full;
  Checkpoint ckpt;
  store_network(ckpt, full);
  DehazingModel<float> ablation({}, false);
  try {
    load_network(ckpt, ablation);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::checkpoint_shape);
    EXPECT_NE(std::string(e.what()).find("removal.block1.conv1.kernel"), std::string::npos);
  }
  GeneratorNet<float> gen;
  try {
    load_network(ckpt, gen);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::checkpoint_missing);
  }
}

TEST_F(CheckpointTest, DamagedFilesAreClassified) {
  Checkpoint ckpt;
  ckpt.put("w", Tensor<float>(Shape{1, 2, 3, 4}, 0.5f));
  const std::string bytes = serialize_checkpoint(ckpt);
  const auto code_of = [](const std::string& b) {
    try {
      deserialize_checkpoint(b);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io;
  };
  EXPECT_EQ(code_of(bytes.substr(0, bytes.size() - 5)), ErrorCode::checkpoint_truncated);
  std::string flipped = bytes;
  flipped[flipped.size() - 20] ^= 0x40;
  EXPECT_EQ(code_of(flipped), ErrorCode::checkpoint_corrupt);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(code_of(magic), ErrorCode::checkpoint_corrupt);
  std::string version = bytes;
  version[8] = 7;
  EXPECT_EQ(code_of(version), ErrorCode::checkpoint_version);

  save_checkpoint(ckpt, dir_ / "x.ckpt");
  EXPECT_THROW(save_checkpoint(ckpt, dir_ / "x.ckpt"), Error);
  EXPECT_THROW(load_checkpoint(dir_ / "missing.ckpt"), Error);
}

TEST_F(CheckpointTest, AdamStateRoundTrip) {
  Tensor<float> p(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  p.zero_grad();
  for (auto& g : p.grad()) g = 0.5f;
  const std::vector<ParamRef<float>> params{{"p", &p}};
  AdamState<float> state;
  adam_step<float>(params, state);
  Checkpoint ckpt;
  store_adam(ckpt, state, params, "adam.test");
  AdamState<float> back;
  load_adam(ckpt, back, params, "adam.test");
  EXPECT_EQ(back.step, 1);
  EXPECT_EQ(back.moments.at("p").first, state.moments.at("p").first);
  EXPECT_EQ(back.moments.at("p").second, state.moments.at("p").second);
}

}  // namespace
}  // namespace drnet
