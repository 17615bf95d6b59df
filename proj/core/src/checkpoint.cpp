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

#include "drnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace drnet {
namespace {

constexpr std::string_view kMagic = "DRNETCKP";
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename U>
  void pod(U v) {
    char buf[sizeof(U)];
    std::memcpy(buf, &v, sizeof(U));
    out_.append(buf, sizeof(U));
  }
  void str(std::string_view s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename U>
  U pod() {
    U v;
    std::memcpy(&v, take(sizeof(U)), sizeof(U));
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    return std::string(take(n), n);
  }
  const char* take(std::size_t n) {
    if (in_.size() - pos_ < n) {
      fail(ErrorCode::checkpoint_truncated,
           "checkpoint truncated at byte " + std::to_string(pos_) + " (needed " +
               std::to_string(n) + " more)");
    }
    const char* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

const Tensor<float>* Checkpoint::find(std::string_view name) const {
  for (const auto& [key, t] : records) {
    if (key == name) return &t;
  }
  return nullptr;
}

const Tensor<float>& Checkpoint::at(std::string_view name) const {
  const Tensor<float>* t = find(name);
  if (!t) fail(ErrorCode::checkpoint_missing, "checkpoint has no parameter '" + std::string(name) + "'");
  return *t;
}

const std::string& Checkpoint::meta(const std::string& key) const {
  const auto it = metadata.find(key);
  if (it == metadata.end()) fail(ErrorCode::checkpoint_missing, "checkpoint has no metadata key '" + key + "'");
  return it->second;
}

void Checkpoint::put(std::string name, Tensor<float> tensor) {
  for (auto& [key, t] : records) {
    if (key == name) {
      t = std::move(tensor);
      return;
    }
  }
  records.emplace_back(std::move(name), std::move(tensor));
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic.data(), kMagic.size());
  w.pod(kCheckpointVersion);
  w.pod(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(ckpt.records.size()));
  for (const auto& [name, t] : ckpt.records) {
    w.str(name);
    w.pod(std::uint32_t{4});
    for (int d : {t.n(), t.c(), t.h(), t.w()}) w.pod(static_cast<std::uint32_t>(d));
    w.raw(t.data().data(), t.numel() * sizeof(float));
  }
  const std::uint64_t hash = fnv1a(w.bytes());
  w.pod(hash);
  return std::move(w.bytes());
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    if (bytes.size() < kMagic.size() && kMagic.substr(0, bytes.size()) == bytes) {
      fail(ErrorCode::checkpoint_truncated, "checkpoint truncated inside the magic string");
    }
    fail(ErrorCode::checkpoint_corrupt, "not a drnet checkpoint (bad magic)");
  }
  Reader r(bytes);
  r.take(kMagic.size());
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::checkpoint_version, "checkpoint format version " + std::to_string(version) +
                                            ", this build reads version " +
                                            std::to_string(kCheckpointVersion));
  }
  Checkpoint ckpt;
  const auto meta_count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < meta_count; ++i) {
    std::string k = r.str();
    ckpt.metadata[std::move(k)] = r.str();
  }
  const auto record_count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < record_count; ++i) {
    std::string name = r.str();
    const auto rank = r.pod<std::uint32_t>();
    require(rank == 4, ErrorCode::checkpoint_corrupt,
            "checkpoint record '" + name + "' has rank " + std::to_string(rank));
    Shape s;
    s.n = static_cast<int>(r.pod<std::uint32_t>());
    s.c = static_cast<int>(r.pod<std::uint32_t>());
    s.h = static_cast<int>(r.pod<std::uint32_t>());
    s.w = static_cast<int>(r.pod<std::uint32_t>());
    Tensor<float> t(s);
    const std::size_t n = s.numel() * sizeof(float);
    std::memcpy(t.data().data(), r.take(n), n);
    ckpt.records.emplace_back(std::move(name), std::move(t));
  }
  const std::size_t body = bytes.size() - r.remaining();
  const auto stored = r.pod<std::uint64_t>();
  if (r.remaining() != 0) fail(ErrorCode::checkpoint_corrupt, "trailing bytes after checkpoint");
  if (stored != fnv1a(bytes.substr(0, body))) {
    fail(ErrorCode::checkpoint_corrupt, "checkpoint checksum mismatch");
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  require(!std::filesystem::exists(path), ErrorCode::io,
          "refusing to overwrite existing checkpoint " + path.string());
  const std::string bytes = serialize_checkpoint(ckpt);
  const auto tmp = path.string() + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::io, "cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCode::io, "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

void store_adam(Checkpoint& ckpt, const AdamState<float>& state,
                std::span<const ParamRef<float>> params, const std::string& prefix) {
  ckpt.metadata[prefix + ".step"] = std::to_string(state.step);
  for (const auto& p : params) {
    const auto it = state.moments.find(p.name);
    if (it == state.moments.end()) continue;
    const Shape s = p.tensor->shape();
    ckpt.put(prefix + "/m/" + p.name, Tensor<float>(s, it->second.first));
    ckpt.put(prefix + "/v/" + p.name, Tensor<float>(s, it->second.second));
  }
}

void load_adam(const Checkpoint& ckpt, AdamState<float>& state,
               std::span<const ParamRef<float>> params, const std::string& prefix) {
  state.step = std::stoll(ckpt.meta(prefix + ".step"));
  state.moments.clear();
  for (const auto& p : params) {
    const Tensor<float>* m = ckpt.find(prefix + "/m/" + p.name);
    const Tensor<float>* v = ckpt.find(prefix + "/v/" + p.name);
    if (!m || !v) continue;
    require(m->shape() == p.tensor->shape() && v->shape() == p.tensor->shape(),
            ErrorCode::checkpoint_shape, "optimizer moments for '" + p.name + "' have the wrong shape");
    auto& mom = state.moments[p.name];
    mom.first.assign(m->data().begin(), m->data().end());
    mom.second.assign(v->data().begin(), v->data().end());
  }
}

}  // namespace drnet
