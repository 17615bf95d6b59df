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
#include <random>

#include "drnet/error.hpp"
#include "drnet/numerics/activation.hpp"
#include "drnet/numerics/adam.hpp"
#include "drnet/numerics/batch_norm.hpp"
#include "drnet/numerics/conv.hpp"
#include "drnet/numerics/gradcheck.hpp"
#include "drnet/numerics/layout.hpp"
#include "support/oracles.hpp"

namespace drnet {
namespace {

using testing::conv_reference;
using testing::max_relative_error;
using testing::numeric_gradient;
using testing::probe;
using testing::random_tensor;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no drnet::Error thrown";
  return ErrorCode::io;
}

TEST(Tensor, ShapeAndIndexing) {
  Tensor<float> t(Shape{2, 3, 4, 5}, 1.5f);
  EXPECT_EQ(t.numel(), 120u);
  EXPECT_EQ(t.offset(1, 2, 3, 4), 119u);
  t.at(1, 0, 0, 0) = 7.0f;
  EXPECT_EQ(t.plane(1, 0)[0], 7.0f);
  const Tensor<float> s = t.slice(1, 1);
  EXPECT_EQ(s.shape(), (Shape{1, 3, 4, 5}));
  EXPECT_EQ(s[0], 7.0f);
  EXPECT_TRUE(t.all_finite());
  t[3] = std::nanf("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, ShapeMismatchNamesDimension) {
  try {
    require_same_shape(Shape{1, 3, 4, 4}, Shape{1, 3, 5, 4}, "probe");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape_mismatch);
    EXPECT_NE(std::string(e.what()).find("H"), std::string::npos);
  }
}

TEST(Conv, ZeroInputGivesBias) {
  auto layer = ConvLayer<double>::make(1, 2, 3);
  std::mt19937_64 rng(1);
  layer.kernel = random_tensor<double>(layer.kernel.shape(), rng);
  layer.bias[0] = 0.25;
  layer.bias[1] = -3.0;
  const auto y = conv2d_forward(Tensor<double>(Shape{1, 1, 3, 3}), layer);
  for (int i = 0; i < 9; ++i) {
    EXPECT_EQ(y[static_cast<std::size_t>(i)], 0.25);
    EXPECT_EQ(y[static_cast<std::size_t>(9 + i)], -3.0);
  }
}

TEST(Conv, IdentityKernel) {
  auto layer = ConvLayer<float>::make(1, 1, 3);
  layer.kernel.at(0, 0, 1, 1) = 1.0f;
  std::mt19937_64 rng(2);
  const auto x = random_tensor<float>(Shape{2, 1, 6, 7}, rng);
  EXPECT_EQ(conv2d_forward(x, layer), x);
  const auto g = random_tensor<float>(x.shape(), rng);
  EXPECT_EQ(conv2d_backward(x, layer, g).input, g);
}

TEST(Conv, MatchesNestedLoopReference) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> dim(1, 9);
  std::uniform_int_distribution<int> ch(1, 5);
  std::uniform_int_distribution<int> ks(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 * ks(rng) + 1;
    const int stride = trial % 3 == 0 ? 2 : 1;
    auto layer = ConvLayer<double>::make(ch(rng), ch(rng), k, stride);
    layer.kernel = random_tensor<double>(layer.kernel.shape(), rng);
    layer.bias = random_tensor<double>(layer.bias.shape(), rng);
    const auto x = random_tensor<double>(Shape{1 + trial % 2, layer.in_channels(), dim(rng), dim(rng)}, rng);
    const auto y = conv2d_forward(x, layer);
    const auto ref = conv_reference(x, layer);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) ASSERT_NEAR(y[i], ref[i], 1e-12) << "trial " << trial;
  }
  // the documented small case, in float
  auto layer = ConvLayer<float>::make(2, 4, 3);
  layer.kernel = random_tensor<float>(layer.kernel.shape(), rng);
  const auto x = random_tensor<float>(Shape{1, 2, 5, 5}, rng);
  const auto y = conv2d_forward(x, layer);
  const auto ref = conv_reference(x, layer);
  for (std::size_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-6);
}

TEST(Conv, ZeroGradOutGivesZeroGrads) {
  std::mt19937_64 rng(4);
  auto layer = ConvLayer<double>::make(2, 3, 3);
  layer.kernel = random_tensor<double>(layer.kernel.shape(), rng);
  const auto x = random_tensor<double>(Shape{1, 2, 4, 4}, rng);
  const auto g = conv2d_backward(x, layer, Tensor<double>(Shape{1, 3, 4, 4}));
  for (double v : g.input.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.kernel.data()) EXPECT_EQ(v, 0.0);
  for (double v : g.bias.data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = trial % 2 ? 3 : 5;
    auto layer = ConvLayer<double>::make(2, 3, k, trial % 4 == 3 ? 2 : 1);
    layer.kernel = random_tensor<double>(layer.kernel.shape(), rng);
    layer.bias = random_tensor<double>(layer.bias.shape(), rng);
    const auto x = random_tensor<double>(Shape{2, 2, 5, 6}, rng);
    const auto w = random_tensor<double>(layer.output_shape(x.shape()), rng);
    const auto g = conv2d_backward(x, layer, w);

    const auto gi = numeric_gradient([&](const Tensor<double>& xi) { return probe(conv2d_forward(xi, layer), w); }, x, 1e-4);
    EXPECT_LT(max_relative_error(g.input.data(), gi), 1e-4);
    const auto gk = numeric_gradient(
        [&](const Tensor<double>& kk) {
          auto l = layer;
          l.kernel = kk;
          return probe(conv2d_forward(x, l), w);
        },
        layer.kernel, 1e-4);
    EXPECT_LT(max_relative_error(g.kernel.data(), gk), 1e-4);
    const auto gb = numeric_gradient(
        [&](const Tensor<double>& b) {
          auto l = layer;
          l.bias = b;
          return probe(conv2d_forward(x, l), w);
        },
        layer.bias, 1e-4);
    EXPECT_LT(max_relative_error(g.bias.data(), gb), 1e-4);
  }
}

TEST(Conv, RejectsWrongChannelCount) {
  auto layer = ConvLayer<float>::make(3, 4, 3);
  try {
    conv2d_forward(Tensor<float>(Shape{1, 2, 4, 4}), layer);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape_mismatch);
    EXPECT_NE(std::string(e.what()).find("C=2"), std::string::npos);
  }
  EXPECT_EQ(code_of([] { ConvLayer<float>::make(3, 4, 4); }), ErrorCode::invalid_argument);
}

TEST(Activation, ForwardExamples) {
  const Tensor<float> x(Shape{1, 1, 1, 3}, {-1.0f, 0.0f, 2.0f});
  EXPECT_EQ(activation_forward(x, Activation::relu()), (Tensor<float>(Shape{1, 1, 1, 3}, {0, 0, 2})));
  const Tensor<double> zero(Shape{1, 1, 1, 1});
  EXPECT_EQ(activation_forward(zero, Activation::scaled_tanh())[0], 0.5);
  EXPECT_EQ(activation_forward(zero, Activation::sigmoid())[0], 0.5);
  const Tensor<double> neg(Shape{1, 1, 1, 1}, {-2.0});
  EXPECT_DOUBLE_EQ(activation_forward(neg, Activation::leaky_relu(0.2))[0], -0.4);
  // extreme inputs stay finite
  const Tensor<double> big(Shape{1, 1, 1, 2}, {-800.0, 800.0});
  const auto s = activation_forward(big, Activation::sigmoid());
  EXPECT_TRUE(s.all_finite());
  EXPECT_EQ(s[1], 1.0);
}

TEST(Activation, ReluBackwardMasks) {
  const Tensor<double> x(Shape{1, 1, 1, 2}, {-1.0, 1.0});
  const Tensor<double> g(Shape{1, 1, 1, 2}, {5.0, 7.0});
  const auto r = activation_backward(x, Activation::relu(), g);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[1], 7.0);
}

TEST(Activation, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (const auto act : {Activation::relu(), Activation::leaky_relu(0.2), Activation::sigmoid(),
                         Activation::scaled_tanh(), Activation::identity()}) {
    auto x = random_tensor<double>(Shape{1, 2, 4, 4}, rng, -3, 3);
    for (auto& v : x.data())
      if (std::abs(v) < 0.05) v += 0.1;  // keep kinks outside the stencil
    const auto w = random_tensor<double>(x.shape(), rng);
    const auto g = activation_backward(x, act, w);
    const auto n = numeric_gradient([&](const Tensor<double>& xi) { return probe(activation_forward(xi, act), w); }, x);
    EXPECT_LT(max_relative_error(g.data(), n), 1e-6);
  }
}

TEST(Layout, ConcatAndSplit) {
  std::mt19937_64 rng(7);
  const auto a = random_tensor<float>(Shape{2, 16, 3, 4}, rng);
  const auto b = random_tensor<float>(Shape{2, 1, 3, 4}, rng);
  const auto c = concat_channels(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 17, 3, 4}));
  EXPECT_EQ(c.at(1, 16, 2, 3), b.at(1, 0, 2, 3));
  EXPECT_EQ(c.at(1, 5, 0, 1), a.at(1, 5, 0, 1));
  EXPECT_EQ(concat_channels(a, Tensor<float>()), a);
  const auto [ga, gb] = split_channels(c, 16);
  EXPECT_EQ(ga, a);
  EXPECT_EQ(gb, b);
  EXPECT_EQ(code_of([&] { concat_channels(a, Tensor<float>(Shape{1, 1, 3, 4})); }),
            ErrorCode::shape_mismatch);
}

TEST(Layout, GlobalAveragePoolGradient) {
  std::mt19937_64 rng(8);
  const auto x = random_tensor<double>(Shape{2, 3, 4, 5}, rng);
  const auto w = random_tensor<double>(Shape{2, 3, 1, 1}, rng);
  const auto g = global_average_pool_backward(x.shape(), w);
  const auto n = numeric_gradient([&](const Tensor<double>& xi) { return probe(global_average_pool(xi), w); }, x);
  EXPECT_LT(max_relative_error(g.data(), n), 1e-6);
}

TEST(BatchNorm, ConstantChannelGivesBeta) {
  auto bn = BatchNorm<double>::make(2);
  bn.beta[0] = 0.3;
  bn.beta[1] = -0.7;
  bn.gamma[0] = 5.0;
  Tensor<double> x(Shape{3, 2, 4, 4}, 2.5);
  const auto y = batch_norm_forward(x, bn, Mode::train);
  for (int n = 0; n < 3; ++n) {
    for (double v : y.plane(n, 0)) EXPECT_DOUBLE_EQ(v, 0.3);
    for (double v : y.plane(n, 1)) EXPECT_DOUBLE_EQ(v, -0.7);
  }
}

TEST(BatchNorm, StandardizedInputPassesThrough) {
  std::mt19937_64 rng(9);
  auto x = random_tensor<double>(Shape{4, 1, 8, 8}, rng);
  double mean = 0, sq = 0;
  for (double v : x.data()) mean += v;
  mean /= static_cast<double>(x.numel());
  for (double v : x.data()) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / static_cast<double>(x.numel()));
  for (auto& v : x.data()) v = (v - mean) / sd;
  auto bn = BatchNorm<double>::make(1);
  const auto y = batch_norm_forward(x, bn, Mode::train);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y[i], x[i], 1e-4);
}

TEST(BatchNorm, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(10);
  for (const Mode mode : {Mode::train, Mode::eval}) {
    auto bn = BatchNorm<double>::make(3);
    bn.gamma = random_tensor<double>(bn.gamma.shape(), rng, 0.5, 1.5);
    bn.beta = random_tensor<double>(bn.beta.shape(), rng);
    bn.running_mean = random_tensor<double>(bn.running_mean.shape(), rng);
    bn.running_var = random_tensor<double>(bn.running_var.shape(), rng, 0.5, 2.0);
    const auto x = random_tensor<double>(Shape{2, 3, 3, 4}, rng);
    const auto w = random_tensor<double>(x.shape(), rng);
    BatchNormCache<double> cache;
    auto work = bn;
    batch_norm_forward(x, work, mode, &cache);
    const auto g = batch_norm_backward(cache, bn, w);
    const auto f = [&](const BatchNorm<double>& b, const Tensor<double>& xi) {
      auto copy = b;
      return probe(batch_norm_forward(xi, copy, mode), w);
    };
    const auto gi = numeric_gradient([&](const Tensor<double>& xi) { return f(bn, xi); }, x, 1e-5);
    EXPECT_LT(max_relative_error(g.input.data(), gi, 1e-7), 1e-3);
    const auto gg = numeric_gradient(
        [&](const Tensor<double>& gamma) {
          auto b = bn;
          b.gamma = gamma;
          return f(b, x);
        },
        bn.gamma, 1e-5);
    EXPECT_LT(max_relative_error(g.gamma.data(), gg), 1e-4);
    const auto gb = numeric_gradient(
        [&](const Tensor<double>& beta) {
          auto b = bn;
          b.beta = beta;
          return f(b, x);
        },
        bn.beta, 1e-5);
    EXPECT_LT(max_relative_error(g.beta.data(), gb), 1e-4);
  }
}

TEST(BatchNorm, TrainModeNeedsTwoValues) {
  auto bn = BatchNorm<float>::make(1);
  EXPECT_EQ(code_of([&] { batch_norm_forward(Tensor<float>(Shape{1, 1, 1, 1}), bn, Mode::train); }),
            ErrorCode::invalid_argument);
}

TEST(Adam, DefaultsMatchReferenceSettings) {
  const AdamConfig cfg;
  EXPECT_EQ(cfg.learning_rate, 0.0002);
  EXPECT_EQ(cfg.beta1, 0.9);
  EXPECT_EQ(cfg.beta2, 0.999);
  EXPECT_EQ(cfg.epsilon, 1e-8);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor<double> p(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  const Tensor<double> before = p;
  p.zero_grad();
  const std::vector<ParamRef<double>> params{{"p", &p}};
  AdamState<double> state;
  for (int i = 0; i < 10; ++i) adam_step<double>(params, state);
  EXPECT_EQ(p, before);
  EXPECT_EQ(state.step, 10);
}

TEST(Adam, FirstStepHandComputed) {
  Tensor<double> p(Shape{1, 1, 1, 2}, {1.0, -1.0});
  p.zero_grad();
  p.grad()[0] = 0.3;
  p.grad()[1] = -5.0;
  const std::vector<ParamRef<double>> params{{"p", &p}};
  AdamState<double> state;
  adam_step<double>(params, state);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
  EXPECT_NEAR(p[0], 1.0 - 2e-4 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(p[1], -1.0 + 2e-4 * 5.0 / (5.0 + 1e-8), 1e-15);
  EXPECT_EQ(state.moments.at("p").first.size(), 2u);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  Tensor<float> p(Shape{1, 1, 1, 3});
  p.zero_grad();
  p.grad()[2] = std::nanf("");
  const std::vector<ParamRef<float>> params{{"removal.out.kernel", &p}};
  AdamState<float> state;
  try {
    adam_step<float>(params, state);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::non_finite);
    EXPECT_NE(std::string(e.what()).find("removal.out.kernel"), std::string::npos);
  }
  EXPECT_EQ(state.step, 0);
}

TEST(Gradcheck, SumOfSquaresIsExact) {
  std::mt19937_64 rng(11);
  auto x = random_tensor<double>(Shape{1, 2, 3, 3}, rng);
  const std::vector<ParamRef<double>> params{{"x", &x}};
  const Objective<double> f = [&](bool grad) {
    double s = 0;
    if (grad) x.zero_grad();
    for (std::size_t i = 0; i < x.numel(); ++i) {
      s += x[i] * x[i];
      if (grad) x.grad()[i] = 2 * x[i];
    }
    return s;
  };
  EXPECT_LT(gradcheck(f, std::span<const ParamRef<double>>(params)).max_rel_error, 1e-8);
}

struct TwoLayerNet {
  ConvLayer<double> a = ConvLayer<double>::make(2, 3, 3);
  ConvLayer<double> b = ConvLayer<double>::make(3, 1, 3);
  Tensor<double> x, target;
  bool corrupt = false;

  double objective(bool grad) {
    const auto h = conv2d_forward(x, a);
    const auto r = activation_forward(h, Activation::sigmoid());
    const auto y = conv2d_forward(r, b);
    double loss = 0;
    Tensor<double> gy(y.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) {
      const double d = y[i] - target[i];
      loss += d * d / static_cast<double>(y.numel());
      gy[i] = 2 * d / static_cast<double>(y.numel());
    }
    if (grad) {
      const auto gb = conv2d_backward(r, b, gy);
      auto gr = activation_backward(h, Activation::sigmoid(), gb.input);
      if (corrupt) gr[0] *= 1.5;
      const auto ga = conv2d_backward(x, a, gr);
      a.kernel.zero_grad();
      a.bias.zero_grad();
      b.kernel.zero_grad();
      b.bias.zero_grad();
      std::copy(ga.kernel.data().begin(), ga.kernel.data().end(), a.kernel.grad().begin());
      std::copy(ga.bias.data().begin(), ga.bias.data().end(), a.bias.grad().begin());
      std::copy(gb.kernel.data().begin(), gb.kernel.data().end(), b.kernel.grad().begin());
      std::copy(gb.bias.data().begin(), gb.bias.data().end(), b.bias.grad().begin());
    }
    return loss;
  }
};

TEST(Gradcheck, TwoLayerConvNetAndFaultInjection) {
  std::mt19937_64 rng(12);
  TwoLayerNet net;
  net.a.kernel = random_tensor<double>(net.a.kernel.shape(), rng);
  net.b.kernel = random_tensor<double>(net.b.kernel.shape(), rng);
  net.x = random_tensor<double>(Shape{1, 2, 5, 5}, rng);
  net.target = random_tensor<double>(Shape{1, 1, 5, 5}, rng);
  const std::vector<ParamRef<double>> params{
      {"a.kernel", &net.a.kernel}, {"a.bias", &net.a.bias}, {"b.kernel", &net.b.kernel}, {"b.bias", &net.b.bias}};
  const Objective<double> f = [&](bool g) { return net.objective(g); };
  EXPECT_LT(gradcheck(f, std::span<const ParamRef<double>>(params)).max_rel_error, 1e-4);
  net.corrupt = true;
  const auto bad = gradcheck(f, std::span<const ParamRef<double>>(params));
  EXPECT_GT(bad.max_rel_error, 1e-2);
  EXPECT_EQ(bad.worst_param.substr(0, 2), "a.");
}

}  // namespace
}  // namespace drnet
