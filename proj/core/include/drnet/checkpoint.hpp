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
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drnet/networks.hpp"
#include "drnet/numerics/adam.hpp"

namespace drnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Named float32 tensors plus string metadata.
///
/// File layout (little-endian): the 8-byte magic "DRNETCKP", a u32 version,
/// a u32 metadata count followed by length-prefixed key/value strings, a u32
/// record count followed by records (length-prefixed name, u32 rank = 4, four
/// u32 dims, raw float32 values), and a trailing u64 FNV-1a hash of everything
/// before it.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  std::vector<std::pair<std::string, Tensor<float>>> records;

  const Tensor<float>* find(std::string_view name) const;
  /// Throws checkpoint_missing when absent.
  const Tensor<float>& at(std::string_view name) const;
  const std::string& meta(const std::string& key) const;
  void put(std::string name, Tensor<float> tensor);
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Refuses to overwrite an existing file.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Adds every parameter and buffer of `net` as float32 records.
template <template <typename> class Net, typename T>
void store_network(Checkpoint& ckpt, Net<T>& net) {
  net.visit([&](const std::string& name, Tensor<T>& t, ParamRole) {
    ckpt.put(name, t.template cast<float>());
  });
}

/// Restores every parameter and buffer of `net` by name. A record with a
/// different shape throws checkpoint_shape naming the parameter.
template <template <typename> class Net, typename T>
void load_network(const Checkpoint& ckpt, Net<T>& net) {
  net.visit([&](const std::string& name, Tensor<T>& t, ParamRole) {
    const Tensor<float>& src = ckpt.at(name);
    require(src.shape() == t.shape(), ErrorCode::checkpoint_shape,
            "checkpoint parameter '" + name + "' has shape " + src.shape().str() +
                ", network expects " + t.shape().str());
    t = src.template cast<T>();
  });
}

/// Optimizer moments are stored as "<prefix>/m/<param>" and "<prefix>/v/<param>"
/// records plus a "<prefix>.step" metadata entry.
void store_adam(Checkpoint& ckpt, const AdamState<float>& state,
                std::span<const ParamRef<float>> params, const std::string& prefix);
void load_adam(const Checkpoint& ckpt, AdamState<float>& state,
               std::span<const ParamRef<float>> params, const std::string& prefix);

}  // namespace drnet
