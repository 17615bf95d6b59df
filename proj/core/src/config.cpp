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

#include "drnet/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace drnet {
namespace {

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  fail(ErrorCode::config, "config key '" + key + "': expected " + want + ", got '" + value + "'");
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v, "a number");
    return out;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true or false");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

#define DRNET_INT_KEY(name, field)                                                     \
  Key {                                                                                \
    name, [](RunConfig& c, const std::string& v) { c.field = static_cast<decltype(c.field)>(to_int(name, v)); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                     \
  }
#define DRNET_DOUBLE_KEY(name, field)                                                  \
  Key {                                                                                \
    name, [](RunConfig& c, const std::string& v) { c.field = to_double(name, v); },    \
        [](const RunConfig& c) { return fmt_double(c.field); }                         \
  }
#define DRNET_BOOL_KEY(name, field)                                                    \
  Key {                                                                                \
    name, [](RunConfig& c, const std::string& v) { c.field = to_bool(name, v); },      \
        [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }     \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      Key{"seed",
          [](RunConfig& c, const std::string& v) {
            const auto s = to_int("seed", v);
            if (s < 0) bad_value("seed", v, "a non-negative integer");
            c.dataset.seed = c.train.seed = static_cast<std::uint64_t>(s);
          },
          [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      DRNET_INT_KEY("dataset.train_scenes", dataset.train_scenes),
      DRNET_INT_KEY("dataset.val_scenes", dataset.val_scenes),
      DRNET_INT_KEY("dataset.samples_per_scene", dataset.samples_per_scene),
      DRNET_INT_KEY("dataset.height", dataset.height),
      DRNET_INT_KEY("dataset.width", dataset.width),
      DRNET_DOUBLE_KEY("train.learning_rate", train.adam.learning_rate),
      DRNET_DOUBLE_KEY("train.beta1", train.adam.beta1),
      DRNET_DOUBLE_KEY("train.beta2", train.adam.beta2),
      DRNET_DOUBLE_KEY("train.epsilon", train.adam.epsilon),
      DRNET_INT_KEY("train.batch_size_dehaze", train.batch_size_dehaze),
      DRNET_INT_KEY("train.batch_size_refine", train.batch_size_refine),
      DRNET_INT_KEY("train.dehaze_steps", train.dehaze_steps),
      DRNET_INT_KEY("train.refine_content_steps", train.refine_content_steps),
      DRNET_INT_KEY("train.refine_adversarial_steps", train.refine_adversarial_steps),
      DRNET_DOUBLE_KEY("train.transmission_loss_weight", train.transmission_loss_weight),
      DRNET_DOUBLE_KEY("train.dehaze_loss_weight", train.dehaze_loss_weight),
      DRNET_DOUBLE_KEY("train.adversarial_weight", train.adversarial_weight),
      DRNET_BOOL_KEY("train.ablation_no_transmission", train.ablation_no_transmission),
      DRNET_INT_KEY("train.validate_every", train.validate_every),
      DRNET_INT_KEY("train.checkpoint_every", train.checkpoint_every),
      DRNET_BOOL_KEY("train.early_stop", train.early_stop),
      DRNET_INT_KEY("train.early_stop_window", train.early_stop_window),
      DRNET_DOUBLE_KEY("train.early_stop_min_improvement", train.early_stop_min_improvement),
      DRNET_INT_KEY("train.saturation_window", train.saturation_window),
      DRNET_BOOL_KEY("train.gradient_spot_check", train.gradient_spot_check),
      DRNET_DOUBLE_KEY("train.spot_check_tolerance", train.spot_check_tolerance),
      DRNET_BOOL_KEY("train.record_wall_clock", train.record_wall_clock),
      DRNET_INT_KEY("ssim.patch_size", train.ssim.patch_size),
      DRNET_DOUBLE_KEY("ssim.c1", train.ssim.c1),
      DRNET_DOUBLE_KEY("ssim.c2", train.ssim.c2),
      Key{"ssim.window",
          [](RunConfig& c, const std::string& v) {
            if (v == "box") {
              c.train.ssim.window = SsimConfig::Window::box;
            } else if (v == "gaussian") {
              c.train.ssim.window = SsimConfig::Window::gaussian;
            } else {
              bad_value("ssim.window", v, "box or gaussian");
            }
          },
          [](const RunConfig& c) {
            return std::string(c.train.ssim.window == SsimConfig::Window::box ? "box" : "gaussian");
          }},
      DRNET_DOUBLE_KEY("ssim.gaussian_sigma", train.ssim.gaussian_sigma),
      DRNET_INT_KEY("arch.removal_blocks", train.arch.removal_blocks),
      DRNET_INT_KEY("arch.removal_layers_per_block", train.arch.removal_layers_per_block),
      DRNET_INT_KEY("arch.removal_width", train.arch.removal_width),
      DRNET_INT_KEY("arch.generator_depth", train.arch.generator_depth),
      DRNET_INT_KEY("arch.generator_skips", train.arch.generator_skips),
      DRNET_INT_KEY("arch.generator_width", train.arch.generator_width),
      DRNET_INT_KEY("refine.pool_scenes", refine_pool_scenes),
      DRNET_INT_KEY("refine.target_scenes", refine_target_scenes),
  };
  return table;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

RunConfig RunConfig::reference() {
  RunConfig c;
  c.dataset = DatasetSpec::reference();
  c.train.batch_size_dehaze = 16;
  c.train.batch_size_refine = 8;
  return c;
}

RunConfig parse_config(std::string_view text, const std::string& origin) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<std::string> unknown;
  std::string scale = "desk";
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCode::config,
            origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    require(!key.empty() && !value.empty(), ErrorCode::config,
            origin + ":" + std::to_string(line_no) + ": empty key or value");
    if (key == "scale") {
      require(value == "desk" || value == "reference", ErrorCode::config,
              origin + ": scale must be desk or reference, got '" + value + "'");
      scale = value;
      continue;
    }
    bool known = false;
    for (const auto& k : keys()) known = known || key == k.name;
    if (!known) {
      unknown.push_back(key);
      continue;
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    fail(ErrorCode::config, origin + ": unknown config keys: " + list);
  }
  RunConfig cfg = scale == "reference" ? RunConfig::reference() : RunConfig{};
  for (const auto& [key, value] : entries) {
    for (const auto& k : keys()) {
      if (key == k.name) k.set(cfg, value);
    }
  }
  require(cfg.dataset.train_scenes >= 0 && cfg.dataset.val_scenes >= 0 &&
              cfg.dataset.samples_per_scene > 0 && cfg.dataset.height > 0 &&
              cfg.dataset.width > 0,
          ErrorCode::config, origin + ": dataset sizes must be positive");
  require(cfg.refine_pool_scenes > 0 && cfg.refine_target_scenes > 0, ErrorCode::config,
          origin + ": refine pool sizes must be positive");
  cfg.train.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string format_config(const RunConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + " = " + k.get(config) + "\n";
  return out;
}

std::string config_hash(const TrainConfig& config) {
  RunConfig rc;
  rc.train = config;
  std::string text;
  for (const auto& k : keys()) {
    const std::string name = k.name;
    if (name.rfind("dataset.", 0) == 0 || name.rfind("refine.", 0) == 0) continue;
    text += name + "=" + k.get(rc) + "\n";
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace drnet
