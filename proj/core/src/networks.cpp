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

#include "drnet/networks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "drnet/numerics/layout.hpp"

namespace drnet {
namespace {

template <typename T>
void accumulate_grad(Tensor<T>& param, const Tensor<T>& g) {
  auto dst = param.grad();
  const auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

template <typename T>
void accumulate_conv(ConvLayer<T>& layer, const ConvGrads<T>& g) {
  accumulate_grad(layer.kernel, g.kernel);
  accumulate_grad(layer.bias, g.bias);
}

template <typename T>
void visit_conv(ConvLayer<T>& layer, const std::string& prefix, const ParamVisitor<T>& fn) {
  fn(prefix + ".kernel", layer.kernel, ParamRole::kernel);
  fn(prefix + ".bias", layer.bias, ParamRole::bias);
}

template <typename T>
void visit_norm(BatchNorm<T>& bn, const std::string& prefix, const ParamVisitor<T>& fn) {
  fn(prefix + ".gamma", bn.gamma, ParamRole::gamma);
  fn(prefix + ".beta", bn.beta, ParamRole::beta);
  fn(prefix + ".running_mean", bn.running_mean, ParamRole::running_mean);
  fn(prefix + ".running_var", bn.running_var, ParamRole::running_var);
}

template <typename T>
ConvStage<T> stage(int in, int out, int k, Activation act, int stride = 1) {
  ConvStage<T> s;
  s.conv = ConvLayer<T>::make(in, out, k, stride);
  s.act = act;
  return s;
}

template <typename T>
void require_channels(const Tensor<T>& x, int channels, const char* who) {
  require(x.c() == channels, ErrorCode::shape_mismatch,
          std::string(who) + ": expects " + std::to_string(channels) + "-channel input, got " +
              x.shape().str());
}

template <typename T>
void require_map_like(const Tensor<T>& map, const Tensor<T>& image, const char* who) {
  require(map.c() == 1 && map.n() == image.n() && map.h() == image.h() && map.w() == image.w(),
          ErrorCode::shape_mismatch,
          std::string(who) + ": transmission " + map.shape().str() +
              " must be single-channel with the image's N/H/W " + image.shape().str());
}

std::string layer_name(const char* base, int index) {
  return std::string(base) + std::to_string(index);
}

}  // namespace

void ArchitectureConfig::validate() const {
  require(removal_blocks >= 1 && removal_layers_per_block >= 1 && removal_width >= 1,
          ErrorCode::config, "architecture: haze removal sizes must be positive");
  require(generator_depth >= 2 && generator_width >= 1, ErrorCode::config,
          "architecture: generator depth must be >= 2");
  require(generator_skips >= 0 && 2 * generator_skips <= generator_depth - 2, ErrorCode::config,
          "architecture: generator_skips must satisfy 0 <= skips <= (depth - 2) / 2");
}

// --- ConvStage ----------------------------------------------------------------

template <typename T>
Tensor<T> ConvStage<T>::infer(const Tensor<T>& x) const {
  return activation_forward(conv2d_forward(x, conv), act);
}

template <typename T>
Tensor<T> ConvStage<T>::forward(const Tensor<T>& x) {
  input = x;
  pre = conv2d_forward(x, conv);
  return activation_forward(pre, act);
}

template <typename T>
Tensor<T> ConvStage<T>::backward(const Tensor<T>& grad_out) {
  const Tensor<T> g_pre = activation_backward(pre, act, grad_out);
  ConvGrads<T> g = conv2d_backward(input, conv, g_pre);
  accumulate_conv(conv, g);
  return std::move(g.input);
}

template <typename T>
void ConvStage<T>::visit(const std::string& prefix, const ParamVisitor<T>& fn) {
  visit_conv(conv, prefix, fn);
}

// --- CoarseNet ----------------------------------------------------------------

template <typename T>
CoarseNet<T>::CoarseNet()
    : stages{stage<T>(3, 16, 11, Activation::relu()), stage<T>(16, 16, 9, Activation::relu()),
             stage<T>(16, 16, 7, Activation::relu()), stage<T>(16, 1, 5, Activation::sigmoid())} {}

template <typename T>
Tensor<T> CoarseNet<T>::infer(const Tensor<T>& hazy) const {
  require_channels(hazy, 3, "coarse_forward");
  Tensor<T> x = hazy;
  for (const auto& s : stages) x = s.infer(x);
  return x;
}

template <typename T>
Tensor<T> CoarseNet<T>::forward(const Tensor<T>& hazy) {
  require_channels(hazy, 3, "coarse_forward");
  Tensor<T> x = hazy;
  for (auto& s : stages) x = s.forward(x);
  return x;
}

template <typename T>
Tensor<T> CoarseNet<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (auto it = stages.rbegin(); it != stages.rend(); ++it) g = it->backward(g);
  return g;
}

template <typename T>
void CoarseNet<T>::visit(const ParamVisitor<T>& fn) {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    stages[i].visit(layer_name("coarse.conv", static_cast<int>(i) + 1), fn);
  }
}

// --- FineNet ------------------------------------------------------------------

template <typename T>
FineNet<T>::FineNet()
    : stages{stage<T>(3, 16, 7, Activation::relu()), stage<T>(17, 16, 5, Activation::relu()),
             stage<T>(16, 16, 3, Activation::relu()), stage<T>(16, 1, 1, Activation::sigmoid())} {}

template <typename T>
Tensor<T> FineNet<T>::infer(const Tensor<T>& hazy, const Tensor<T>& coarse_t) const {
  require_channels(hazy, 3, "fine_forward");
  require_map_like(coarse_t, hazy, "fine_forward");
  Tensor<T> x = concat_channels(stages[0].infer(hazy), coarse_t);
  for (std::size_t i = 1; i < stages.size(); ++i) x = stages[i].infer(x);
  return x;
}

template <typename T>
Tensor<T> FineNet<T>::forward(const Tensor<T>& hazy, const Tensor<T>& coarse_t) {
  require_channels(hazy, 3, "fine_forward");
  require_map_like(coarse_t, hazy, "fine_forward");
  Tensor<T> x = concat_channels(stages[0].forward(hazy), coarse_t);
  for (std::size_t i = 1; i < stages.size(); ++i) x = stages[i].forward(x);
  return x;
}

template <typename T>
typename FineNet<T>::InputGrads FineNet<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (std::size_t i = stages.size() - 1; i >= 1; --i) g = stages[i].backward(g);
  auto [g_first, g_coarse] = split_channels(g, first_channels_);
  return {stages[0].backward(g_first), std::move(g_coarse)};
}

template <typename T>
void FineNet<T>::visit(const ParamVisitor<T>& fn) {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    stages[i].visit(layer_name("fine.conv", static_cast<int>(i) + 1), fn);
  }
}

// --- HazeRemovalNet -----------------------------------------------------------

template <typename T>
HazeRemovalNet<T>::HazeRemovalNet(const ArchitectureConfig& arch, int in_channels)
    : in_channels_(in_channels) {
  arch.validate();
  require(in_channels == 3 || in_channels == 4, ErrorCode::invalid_argument,
          "haze removal input must have 3 or 4 channels, got " + std::to_string(in_channels));
  int channels = in_channels;
  for (int b = 0; b < arch.removal_blocks; ++b) {
    std::vector<ConvStage<T>> block;
    for (int l = 0; l < arch.removal_layers_per_block; ++l) {
      block.push_back(stage<T>(l == 0 ? channels : arch.removal_width, arch.removal_width, 3,
                               Activation::relu()));
    }
    blocks.push_back(std::move(block));
    channels += arch.removal_width;
  }
  output = stage<T>(channels, 3, 3, Activation::identity());
}

template <typename T>
Tensor<T> HazeRemovalNet<T>::join_inputs(const Tensor<T>& hazy,
                                         const Tensor<T>& transmission) const {
  require_channels(hazy, 3, "haze_removal_forward");
  if (in_channels_ == 3) {
    require(transmission.empty(), ErrorCode::invalid_argument,
            "haze_removal_forward: this network takes no transmission map");
    return hazy;
  }
  require_map_like(transmission, hazy, "haze_removal_forward");
  return concat_channels(hazy, transmission);
}

template <typename T>
Tensor<T> HazeRemovalNet<T>::infer(const Tensor<T>& hazy, const Tensor<T>& transmission) const {
  Tensor<T> x = join_inputs(hazy, transmission);
  for (const auto& block : blocks) {
    Tensor<T> y = x;
    for (const auto& s : block) y = s.infer(y);
    x = concat_channels(y, x);
  }
  return output.infer(x);
}

template <typename T>
Tensor<T> HazeRemovalNet<T>::forward(const Tensor<T>& hazy, const Tensor<T>& transmission) {
  Tensor<T> x = join_inputs(hazy, transmission);
  for (auto& block : blocks) {
    Tensor<T> y = x;
    for (auto& s : block) y = s.forward(y);
    x = concat_channels(y, x);
  }
  return output.forward(x);
}

template <typename T>
typename HazeRemovalNet<T>::InputGrads HazeRemovalNet<T>::backward(
    const Tensor<T>& grad_residual) {
  Tensor<T> g = output.backward(grad_residual);
  for (std::size_t b = blocks.size(); b-- > 0;) {
    const int width = blocks[b].back().conv.out_channels();
    auto [g_y, g_skip] = split_channels(g, width);
    for (auto it = blocks[b].rbegin(); it != blocks[b].rend(); ++it) g_y = it->backward(g_y);
    add_in_place(g_y, g_skip);
    g = std::move(g_y);
  }
  if (in_channels_ == 3) return {std::move(g), Tensor<T>{}};
  auto [g_hazy, g_t] = split_channels(g, 3);
  return {std::move(g_hazy), std::move(g_t)};
}

template <typename T>
void HazeRemovalNet<T>::visit(const ParamVisitor<T>& fn) {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t l = 0; l < blocks[b].size(); ++l) {
      blocks[b][l].visit("removal.block" + std::to_string(b + 1) + ".conv" + std::to_string(l + 1),
                         fn);
    }
  }
  output.visit("removal.out", fn);
}

// --- GeneratorNet -------------------------------------------------------------

template <typename T>
GeneratorNet<T>::GeneratorNet(const ArchitectureConfig& arch)
    : arch_(arch), skips_(arch.generator_skips) {
  arch.validate();
  const int depth = arch.generator_depth;
  const int width = arch.generator_width;
  for (int j = 0; j < depth; ++j) {
    const int in = j == 0 ? 3 : width;
    const int out = j == depth - 1 ? 3 : width;
    convs.push_back(ConvLayer<T>::make(in, out, 3));
    if (j < depth - 1) norms.push_back(BatchNorm<T>::make(out));
  }
}

template <typename T>
int GeneratorNet<T>::skip_source(int to) const {
  const int i = depth() - 1 - to;  // 1-based source layer
  return (i >= 1 && i <= skips_) ? i - 1 : -1;
}

template <typename T>
Tensor<T> GeneratorNet<T>::infer(const Tensor<T>& image) const {
  require_channels(image, 3, "generator_forward");
  const int depth = this->depth();
  std::vector<Tensor<T>> outs(static_cast<std::size_t>(depth - 1));
  Tensor<T> x = image;
  for (int j = 0; j < depth; ++j) {
    if (j > 0) {
      x = outs[static_cast<std::size_t>(j - 1)];
      if (const int src = skip_source(j); src >= 0) add_in_place(x, outs[static_cast<std::size_t>(src)]);
    }
    const Tensor<T> c = conv2d_forward(x, convs[static_cast<std::size_t>(j)]);
    if (j == depth - 1) return activation_forward(c, Activation::scaled_tanh());
    outs[static_cast<std::size_t>(j)] = activation_forward(
        batch_norm_eval(c, norms[static_cast<std::size_t>(j)]), Activation::relu());
  }
  return x;
}

template <typename T>
Tensor<T> GeneratorNet<T>::forward(const Tensor<T>& image, Mode mode) {
  require_channels(image, 3, "generator_forward");
  const auto depth = static_cast<std::size_t>(this->depth());
  inputs_.assign(depth, Tensor<T>{});
  conv_out_.assign(depth, Tensor<T>{});
  norm_out_.assign(depth - 1, Tensor<T>{});
  norm_cache_.assign(depth - 1, BatchNormCache<T>{});
  std::vector<Tensor<T>> outs(depth - 1);
  for (std::size_t j = 0; j < depth; ++j) {
    if (j == 0) {
      inputs_[0] = image;
    } else {
      inputs_[j] = outs[j - 1];
      if (const int src = skip_source(static_cast<int>(j)); src >= 0) {
        add_in_place(inputs_[j], outs[static_cast<std::size_t>(src)]);
      }
    }
    conv_out_[j] = conv2d_forward(inputs_[j], convs[j]);
    if (j == depth - 1) break;
    norm_out_[j] = batch_norm_forward(conv_out_[j], norms[j], mode, &norm_cache_[j]);
    outs[j] = activation_forward(norm_out_[j], Activation::relu());
  }
  return activation_forward(conv_out_[depth - 1], Activation::scaled_tanh());
}

template <typename T>
Tensor<T> GeneratorNet<T>::backward(const Tensor<T>& grad_out) {
  const auto depth = static_cast<std::size_t>(this->depth());
  require(conv_out_.size() == depth, ErrorCode::invalid_argument,
          "generator backward called before forward");
  std::vector<Tensor<T>> g_outs(depth - 1);
  auto add_to = [&](std::size_t idx, const Tensor<T>& g) {
    if (g_outs[idx].empty()) {
      g_outs[idx] = g;
    } else {
      add_in_place(g_outs[idx], g);
    }
  };

  Tensor<T> g_conv =
      activation_backward(conv_out_[depth - 1], Activation::scaled_tanh(), grad_out);
  for (std::size_t j = depth; j-- > 0;) {
    if (j < depth - 1) {
      const Tensor<T> g_norm = activation_backward(norm_out_[j], Activation::relu(), g_outs[j]);
      BatchNormGrads<T> gn = batch_norm_backward(norm_cache_[j], norms[j], g_norm);
      accumulate_grad(norms[j].gamma, gn.gamma);
      accumulate_grad(norms[j].beta, gn.beta);
      g_conv = std::move(gn.input);
    }
    ConvGrads<T> gc = conv2d_backward(inputs_[j], convs[j], g_conv);
    accumulate_conv(convs[j], gc);
    if (j == 0) return std::move(gc.input);
    add_to(j - 1, gc.input);
    if (const int src = skip_source(static_cast<int>(j)); src >= 0) {
      add_to(static_cast<std::size_t>(src), gc.input);
    }
  }
  return {};
}

template <typename T>
const Tensor<T>& GeneratorNet<T>::cached_layer_input(int layer) const {
  require(layer >= 1 && layer <= static_cast<int>(inputs_.size()), ErrorCode::invalid_argument,
          "generator has no cached input for layer " + std::to_string(layer));
  return inputs_[static_cast<std::size_t>(layer - 1)];
}

template <typename T>
void GeneratorNet<T>::visit(const ParamVisitor<T>& fn) {
  for (std::size_t j = 0; j < convs.size(); ++j) {
    visit_conv(convs[j], layer_name("generator.conv", static_cast<int>(j) + 1), fn);
    if (j < norms.size()) visit_norm(norms[j], layer_name("generator.bn", static_cast<int>(j) + 1), fn);
  }
}

// --- DiscriminatorNet ---------------------------------------------------------

namespace {

constexpr double kLeakySlope = 0.2;

template <typename T>
void check_discriminator_input(const Tensor<T>& image) {
  require_channels(image, 3, "discriminator_forward");
  if (image.h() % 16 != 0 || image.w() % 16 != 0 || image.h() == 0 || image.w() == 0) {
    fail(ErrorCode::shape_mismatch,
         "discriminator_forward: H and W must be positive multiples of 16 (four stride-2 "
         "layers), got " + std::to_string(image.h()) + "x" + std::to_string(image.w()) +
             "; nearest valid size is " + std::to_string(std::max(16, image.h() / 16 * 16)) + "x" +
             std::to_string(std::max(16, image.w() / 16 * 16)));
  }
}

// Keeps scores strictly inside (0, 1) where the sigmoid saturates.
template <typename T>
Tensor<T> bounded_sigmoid(const Tensor<T>& logits) {
  Tensor<T> s = activation_forward(logits, Activation::sigmoid());
  const T eps = std::numeric_limits<T>::epsilon();
  for (T& v : s.data()) v = std::clamp(v, eps, T(1) - eps);
  return s;
}

}  // namespace

template <typename T>
DiscriminatorNet<T>::DiscriminatorNet()
    : convs{ConvLayer<T>::make(3, 32, 3, 2), ConvLayer<T>::make(32, 64, 3, 2),
            ConvLayer<T>::make(64, 128, 3, 2), ConvLayer<T>::make(128, 256, 3, 2)},
      norms{BatchNorm<T>::make(64), BatchNorm<T>::make(128), BatchNorm<T>::make(256)},
      head(ConvLayer<T>::make(256, 1, 1)) {}

template <typename T>
Tensor<T> DiscriminatorNet<T>::infer(const Tensor<T>& image) const {
  check_discriminator_input(image);
  Tensor<T> x = image;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    Tensor<T> c = conv2d_forward(x, convs[i]);
    if (i > 0) c = batch_norm_eval(c, norms[i - 1]);
    x = activation_forward(c, Activation::leaky_relu(kLeakySlope));
  }
  return bounded_sigmoid(conv2d_forward(global_average_pool(x), head));
}

template <typename T>
Tensor<T> DiscriminatorNet<T>::forward(const Tensor<T>& image, Mode mode) {
  check_discriminator_input(image);
  Tensor<T> x = image;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    inputs_[i] = x;
    conv_out_[i] = conv2d_forward(x, convs[i]);
    pre_act_[i] = i > 0 ? batch_norm_forward(conv_out_[i], norms[i - 1], mode, &norm_cache_[i - 1])
                        : conv_out_[i];
    x = activation_forward(pre_act_[i], Activation::leaky_relu(kLeakySlope));
  }
  feature_shape_ = x.shape();
  pooled_ = global_average_pool(x);
  logits_ = conv2d_forward(pooled_, head);
  return bounded_sigmoid(logits_);
}

template <typename T>
Tensor<T> DiscriminatorNet<T>::backward(const Tensor<T>& grad_out) {
  require(!logits_.empty(), ErrorCode::invalid_argument,
          "discriminator backward called before forward");
  const Tensor<T> g_logits = activation_backward(logits_, Activation::sigmoid(), grad_out);
  ConvGrads<T> gh = conv2d_backward(pooled_, head, g_logits);
  accumulate_conv(head, gh);
  Tensor<T> g = global_average_pool_backward(feature_shape_, gh.input);
  for (std::size_t i = convs.size(); i-- > 0;) {
    Tensor<T> g_pre = activation_backward(pre_act_[i], Activation::leaky_relu(kLeakySlope), g);
    if (i > 0) {
      BatchNormGrads<T> gn = batch_norm_backward(norm_cache_[i - 1], norms[i - 1], g_pre);
      accumulate_grad(norms[i - 1].gamma, gn.gamma);
      accumulate_grad(norms[i - 1].beta, gn.beta);
      g_pre = std::move(gn.input);
    }
    ConvGrads<T> gc = conv2d_backward(inputs_[i], convs[i], g_pre);
    accumulate_conv(convs[i], gc);
    g = std::move(gc.input);
  }
  return g;
}

template <typename T>
void DiscriminatorNet<T>::visit(const ParamVisitor<T>& fn) {
  for (std::size_t i = 0; i < convs.size(); ++i) {
    visit_conv(convs[i], layer_name("discriminator.conv", static_cast<int>(i) + 1), fn);
    if (i > 0) visit_norm(norms[i - 1], layer_name("discriminator.bn", static_cast<int>(i) + 1), fn);
  }
  visit_conv(head, "discriminator.head", fn);
}

// --- DehazingModel ------------------------------------------------------------

template <typename T>
DehazingModel<T>::DehazingModel(const ArchitectureConfig& arch, bool use_transmission)
    : removal(arch, use_transmission ? 4 : 3), arch_(arch), use_transmission_(use_transmission) {}

template <typename T>
typename DehazingModel<T>::Output DehazingModel<T>::infer(const Tensor<T>& hazy) const {
  Output out;
  if (use_transmission_) {
    out.coarse = coarse.infer(hazy);
    out.fine = fine.infer(hazy, out.coarse);
  }
  out.residual = removal.infer(hazy, out.fine);
  out.dehazed = add(out.residual, hazy);
  return out;
}

template <typename T>
typename DehazingModel<T>::Output DehazingModel<T>::forward(const Tensor<T>& hazy) {
  Output out;
  if (use_transmission_) {
    out.coarse = coarse.forward(hazy);
    out.fine = fine.forward(hazy, out.coarse);
  }
  out.residual = removal.forward(hazy, out.fine);
  out.dehazed = add(out.residual, hazy);
  return out;
}

template <typename T>
void DehazingModel<T>::backward(const Tensor<T>& grad_coarse, const Tensor<T>& grad_fine,
                                const Tensor<T>& grad_residual) {
  auto rg = removal.backward(grad_residual);
  if (!use_transmission_) return;
  Tensor<T> g_fine = std::move(rg.transmission);
  if (!grad_fine.empty()) add_in_place(g_fine, grad_fine);
  auto fg = fine.backward(g_fine);
  Tensor<T> g_coarse = std::move(fg.coarse);
  if (!grad_coarse.empty()) add_in_place(g_coarse, grad_coarse);
  coarse.backward(g_coarse);
}

template <typename T>
void DehazingModel<T>::visit(const ParamVisitor<T>& fn) {
  if (use_transmission_) {
    coarse.visit(fn);
    fine.visit(fn);
  }
  removal.visit(fn);
}

// --- initialization -------------------------------------------------------------

template <typename T>
void init_tensor(Tensor<T>& tensor, ParamRole role, std::mt19937_64& rng) {
  switch (role) {
    case ParamRole::kernel: {
      const double fan_in = static_cast<double>(tensor.c()) * tensor.h() * tensor.w();
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
      for (T& v : tensor.data()) v = static_cast<T>(dist(rng));
      break;
    }
    case ParamRole::bias:
    case ParamRole::beta:
    case ParamRole::running_mean:
      tensor.fill(T(0));
      break;
    case ParamRole::gamma:
    case ParamRole::running_var:
      tensor.fill(T(1));
      break;
  }
}

#define DRNET_INSTANTIATE_NETWORKS(T)                                       \
  template struct ConvStage<T>;                                             \
  template class CoarseNet<T>;                                              \
  template class FineNet<T>;                                                \
  template class HazeRemovalNet<T>;                                         \
  template class GeneratorNet<T>;                                           \
  template class DiscriminatorNet<T>;                                       \
  template class DehazingModel<T>;                                          \
  template void init_tensor(Tensor<T>&, ParamRole, std::mt19937_64&);

DRNET_INSTANTIATE_NETWORKS(float)
DRNET_INSTANTIATE_NETWORKS(double)

#undef DRNET_INSTANTIATE_NETWORKS

}  // namespace drnet
