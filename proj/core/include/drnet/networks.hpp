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

#include <array>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "drnet/numerics/activation.hpp"
#include "drnet/numerics/adam.hpp"
#include "drnet/numerics/batch_norm.hpp"
#include "drnet/numerics/conv.hpp"

namespace drnet {

enum class ParamRole { kernel, bias, gamma, beta, running_mean, running_var };

inline bool is_trainable(ParamRole role) {
  return role != ParamRole::running_mean && role != ParamRole::running_var;
}

template <typename T>
using ParamVisitor = std::function<void(const std::string& name, Tensor<T>& tensor, ParamRole)>;

/// Depths of the haze-removal network and the refinement generator. The
/// transmission networks and the discriminator have fixed layouts.
struct ArchitectureConfig {
  int removal_blocks = 3;
  int removal_layers_per_block = 3;
  int removal_width = 32;
  int generator_depth = 10;
  int generator_skips = 4;
  int generator_width = 32;

  void validate() const;
  bool operator==(const ArchitectureConfig&) const = default;
};

/// Convolution followed by an activation, caching what backward needs.
template <typename T>
struct ConvStage {
  ConvLayer<T> conv;
  Activation act;
  Tensor<T> input;  // cached by forward
  Tensor<T> pre;    // cached pre-activation

  Tensor<T> infer(const Tensor<T>& x) const;
  Tensor<T> forward(const Tensor<T>& x);
  /// Accumulates kernel and bias gradients; returns the input gradient.
  Tensor<T> backward(const Tensor<T>& grad_out);
  void visit(const std::string& prefix, const ParamVisitor<T>& fn);
};

/// Coarse-scale transmission predictor: 3 -> 16 (11x11) -> 16 (9x9) -> 16 (7x7)
/// -> 1 (5x5), ReLU between layers and a sigmoid head. No pooling.
template <typename T>
class CoarseNet {
 public:
  CoarseNet();

  Tensor<T> infer(const Tensor<T>& hazy) const;
  Tensor<T> forward(const Tensor<T>& hazy);
  Tensor<T> backward(const Tensor<T>& grad_out);
  void visit(const ParamVisitor<T>& fn);

  std::array<ConvStage<T>, 4> stages;
};

/// Fine-scale transmission predictor. The first layer's 16 maps are
/// concatenated with the coarse transmission before layer two (17 channels).
template <typename T>
class FineNet {
 public:
  struct InputGrads {
    Tensor<T> hazy;
    Tensor<T> coarse;
  };

  FineNet();

  Tensor<T> infer(const Tensor<T>& hazy, const Tensor<T>& coarse_t) const;
  Tensor<T> forward(const Tensor<T>& hazy, const Tensor<T>& coarse_t);
  InputGrads backward(const Tensor<T>& grad_out);
  void visit(const ParamVisitor<T>& fn);

  std::array<ConvStage<T>, 4> stages;

 private:
  int first_channels_ = 16;
};

/// Residual haze removal: blocks of 3x3 ReLU convolutions whose input is
/// concatenated onto their output, then a linear 3-channel output layer. The
/// input is the hazy image plus, unless `in_channels` is 3, the transmission.
/// No batch normalization.
template <typename T>
class HazeRemovalNet {
 public:
  struct InputGrads {
    Tensor<T> hazy;
    Tensor<T> transmission;  // empty when the network takes no transmission
  };

  explicit HazeRemovalNet(const ArchitectureConfig& arch = {}, int in_channels = 4);

  int in_channels() const { return in_channels_; }

  /// Returns the residual; the dehazed image is residual + hazy.
  Tensor<T> infer(const Tensor<T>& hazy, const Tensor<T>& transmission) const;
  Tensor<T> forward(const Tensor<T>& hazy, const Tensor<T>& transmission);
  InputGrads backward(const Tensor<T>& grad_residual);
  void visit(const ParamVisitor<T>& fn);

  std::vector<std::vector<ConvStage<T>>> blocks;
  ConvStage<T> output;

 private:
  Tensor<T> join_inputs(const Tensor<T>& hazy, const Tensor<T>& transmission) const;

  int in_channels_;
};

/// Refinement generator: `depth` 3x3 convolutions, batch norm + ReLU after all
/// but the last, scaled tanh output. The output of layer i (1-based) is added
/// to the input of layer depth - i for i = 1..skips.
template <typename T>
class GeneratorNet {
 public:
  explicit GeneratorNet(const ArchitectureConfig& arch = {});

  Tensor<T> infer(const Tensor<T>& image) const;  // eval-mode batch norm
  Tensor<T> forward(const Tensor<T>& image, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);
  void visit(const ParamVisitor<T>& fn);

  int depth() const { return static_cast<int>(convs.size()); }
  const ArchitectureConfig& architecture() const { return arch_; }
  template <typename U>
  GeneratorNet<U> cast_network() const;
  /// Input of layer `layer` (1-based) from the last forward call.
  const Tensor<T>& cached_layer_input(int layer) const;

  std::vector<ConvLayer<T>> convs;
  std::vector<BatchNorm<T>> norms;  // one per layer except the last

 private:
  /// 0-based index of the layer whose output feeds a skip into layer `to`
  /// (0-based), or -1.
  int skip_source(int to) const;

  ArchitectureConfig arch_;
  int skips_;
  std::vector<Tensor<T>> inputs_;
  std::vector<Tensor<T>> conv_out_;
  std::vector<Tensor<T>> norm_out_;
  std::vector<BatchNormCache<T>> norm_cache_;
};

/// Image discriminator: four stride-2 3x3 convolutions (32, 64, 128, 256
/// channels) with leaky ReLU (0.2), batch norm after layers 2-4, global average
/// pooling and a 1x1 sigmoid head. Input H and W must be divisible by 16.
/// Scores lie strictly inside (0, 1).
template <typename T>
class DiscriminatorNet {
 public:
  DiscriminatorNet();

  Tensor<T> infer(const Tensor<T>& image) const;
  Tensor<T> forward(const Tensor<T>& image, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);
  void visit(const ParamVisitor<T>& fn);
  template <typename U>
  DiscriminatorNet<U> cast_network() const;

  std::array<ConvLayer<T>, 4> convs;
  std::array<BatchNorm<T>, 3> norms;  // after convs 2, 3, 4
  ConvLayer<T> head;

 private:

  std::array<Tensor<T>, 4> inputs_;
  std::array<Tensor<T>, 4> conv_out_;
  std::array<Tensor<T>, 4> pre_act_;
  std::array<BatchNormCache<T>, 3> norm_cache_;
  Tensor<T> pooled_;
  Tensor<T> logits_;
  Shape feature_shape_{};
};

/// Transmission prediction and haze removal, trained jointly. With
/// use_transmission off (the ablation) the removal network sees only the
/// hazy image and the transmission networks are absent.
template <typename T>
class DehazingModel {
 public:
  struct Output {
    Tensor<T> coarse;  // empty under the ablation
    Tensor<T> fine;    // empty under the ablation
    Tensor<T> residual;
    Tensor<T> dehazed;  // residual + hazy, unclamped
  };

  explicit DehazingModel(const ArchitectureConfig& arch = {}, bool use_transmission = true);

  bool uses_transmission() const { return use_transmission_; }
  const ArchitectureConfig& architecture() const { return arch_; }
  template <typename U>
  DehazingModel<U> cast_network() const;

  Output infer(const Tensor<T>& hazy) const;
  Output forward(const Tensor<T>& hazy);
  /// Backpropagates loss gradients on the coarse map, the fine map and the
  /// residual. The removal network's transmission gradient flows into the fine
  /// network and on into the coarse network.
  void backward(const Tensor<T>& grad_coarse, const Tensor<T>& grad_fine,
                const Tensor<T>& grad_residual);
  void visit(const ParamVisitor<T>& fn);

  CoarseNet<T> coarse;
  FineNet<T> fine;
  HazeRemovalNet<T> removal;

 private:
  ArchitectureConfig arch_;
  bool use_transmission_;
};

template <typename T>
void init_tensor(Tensor<T>& tensor, ParamRole role, std::mt19937_64& rng);

/// Kernels ~ N(0, 2 / (in_channels * k * k)), biases and shifts zero, batch-norm
/// scales one, running statistics reset.
template <template <typename> class Net, typename T>
void init_weights(Net<T>& net, std::mt19937_64& rng) {
  net.visit([&](const std::string&, Tensor<T>& t, ParamRole role) { init_tensor(t, role, rng); });
}

/// Trainable parameters: kernels, biases, batch-norm scale and shift.
template <template <typename> class Net, typename T>
std::vector<ParamRef<T>> trainable_parameters(Net<T>& net) {
  std::vector<ParamRef<T>> out;
  net.visit([&](const std::string& name, Tensor<T>& t, ParamRole role) {
    if (is_trainable(role)) out.push_back({name, &t});
  });
  return out;
}

template <template <typename> class Net, typename T>
void zero_all_grads(Net<T>& net) {
  net.visit([](const std::string&, Tensor<T>& t, ParamRole role) {
    if (is_trainable(role)) t.zero_grad();
  });
}

/// Copies every parameter and buffer from `src` to `dst` by name, converting
/// the scalar type. Both networks must have the same layout.
template <template <typename> class Net, typename TS, typename TD>
void copy_state(Net<TS>& src, Net<TD>& dst) {
  std::vector<std::pair<std::string, Tensor<TS>*>> from;
  src.visit([&](const std::string& name, Tensor<TS>& t, ParamRole) { from.emplace_back(name, &t); });
  std::size_t i = 0;
  dst.visit([&](const std::string& name, Tensor<TD>& t, ParamRole) {
    require(i < from.size() && from[i].first == name && from[i].second->shape() == t.shape(),
            ErrorCode::shape_mismatch, "copy_state: layouts differ at '" + name + "'");
    t = from[i].second->template cast<TD>();
    ++i;
  });
  require(i == from.size(), ErrorCode::shape_mismatch, "copy_state: layouts differ in length");
}

/// Same network with every parameter and buffer converted to scalar U.
template <typename T>
template <typename U>
GeneratorNet<U> GeneratorNet<T>::cast_network() const {
  GeneratorNet<U> out(arch_);
  copy_state(const_cast<GeneratorNet&>(*this), out);
  return out;
}

template <typename T>
template <typename U>
DiscriminatorNet<U> DiscriminatorNet<T>::cast_network() const {
  DiscriminatorNet<U> out;
  copy_state(const_cast<DiscriminatorNet&>(*this), out);
  return out;
}

template <typename T>
template <typename U>
DehazingModel<U> DehazingModel<T>::cast_network() const {
  DehazingModel<U> out(arch_, use_transmission_);
  copy_state(const_cast<DehazingModel&>(*this), out);
  return out;
}

}  // namespace drnet
