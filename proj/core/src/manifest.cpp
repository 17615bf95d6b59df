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

#include "drnet/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "drnet/image_io.hpp"

namespace drnet {
namespace {

using Json = nlohmann::ordered_json;

constexpr int kManifestVersion = 1;

template <typename V>
V field(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail(ErrorCode::manifest, where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::manifest, where + ": field '" + key + "' has the wrong type");
  }
}

Tensor<float> read_checked(const std::filesystem::path& root, const std::string& rel,
                           int channels, int width, int height, const std::string& where) {
  const auto path = root / rel;
  require(std::filesystem::exists(path), ErrorCode::manifest,
          where + ": missing file " + path.string());
  const Image img = read_image(path);
  require(img.width == width && img.height == height && img.channels == channels,
          ErrorCode::manifest,
          where + ": " + rel + " is " + std::to_string(img.width) + "x" +
              std::to_string(img.height) + "x" + std::to_string(img.channels) + ", manifest says " +
              std::to_string(width) + "x" + std::to_string(height) + "x" + std::to_string(channels));
  return image_to_tensor(img);
}

std::string where_of(const ManifestRecord& r) {
  return "manifest record " + r.split + "/scene " + std::to_string(r.scene_id) + "/sample " +
         std::to_string(r.sample_id);
}

}  // namespace

std::string manifest_to_json(const Manifest& manifest) {
  Json j;
  j["format"] = "drnet-manifest";
  j["version"] = kManifestVersion;
  j["root"] = ".";
  j["source"] = manifest.source;
  j["config"] = manifest.config;
  Json records = Json::array();
  for (const auto& r : manifest.records) {
    Json rec;
    rec["split"] = r.split;
    rec["scene"] = r.scene_id;
    rec["sample"] = r.sample_id;
    rec["scene_seed"] = r.scene_seed;
    rec["clear"] = r.clear;
    rec["hazy"] = r.hazy;
    rec["transmission"] = r.transmission;
    rec["depth"] = r.depth;
    rec["airlight"] = r.airlight;
    rec["beta"] = r.beta;
    rec["width"] = r.width;
    rec["height"] = r.height;
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  return j.dump(1) + "\n";
}

Manifest manifest_from_json(const std::string& text, const std::string& origin) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::manifest, origin + ": invalid JSON (" + e.what() + ")");
  }
  require(j.is_object() && j.value("format", "") == "drnet-manifest", ErrorCode::manifest,
          origin + ": not a drnet manifest");
  require(field<int>(j, "version", origin) == kManifestVersion, ErrorCode::manifest,
          origin + ": unsupported manifest version");
  Manifest m;
  m.source = field<std::string>(j, "source", origin);
  m.config = field<std::string>(j, "config", origin);
  const Json& records = j.at("records");
  require(records.is_array(), ErrorCode::manifest, origin + ": 'records' must be an array");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Json& rec = records[i];
    const std::string where = origin + " record " + std::to_string(i);
    ManifestRecord r;
    r.split = field<std::string>(rec, "split", where);
    require(r.split == "train" || r.split == "val", ErrorCode::manifest,
            where + ": split must be train or val");
    r.scene_id = field<int>(rec, "scene", where);
    r.sample_id = field<int>(rec, "sample", where);
    r.scene_seed = field<std::uint64_t>(rec, "scene_seed", where);
    r.clear = field<std::string>(rec, "clear", where);
    r.hazy = field<std::string>(rec, "hazy", where);
    r.transmission = field<std::string>(rec, "transmission", where);
    r.depth = field<std::string>(rec, "depth", where);
    r.airlight = field<double>(rec, "airlight", where);
    r.beta = field<double>(rec, "beta", where);
    r.width = field<int>(rec, "width", where);
    r.height = field<int>(rec, "height", where);
    m.records.push_back(std::move(r));
  }
  return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
  out << manifest_to_json(manifest);
  require(static_cast<bool>(out), ErrorCode::io, "write failed for " + path.string());
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot read manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return manifest_from_json(ss.str(), path.string());
}

void validate_manifest(const Manifest& manifest, const std::filesystem::path& root) {
  for (const auto& r : manifest.records) {
    const std::string where = where_of(r);
    require(r.airlight >= kAirlightMin && r.airlight <= kAirlightMax && r.beta >= kBetaMin &&
                r.beta <= kBetaMax,
            ErrorCode::manifest, where + ": (A, beta) outside the sampling ranges");
    read_checked(root, r.clear, 3, r.width, r.height, where);
    read_checked(root, r.hazy, 3, r.width, r.height, where);
    read_checked(root, r.transmission, 1, r.width, r.height, where);
    read_checked(root, r.depth, 1, r.width, r.height, where);
  }
}

Dataset<float> load_dataset(const Manifest& manifest, const std::filesystem::path& root) {
  Dataset<float> data;
  for (const auto& r : manifest.records) {
    const std::string where = where_of(r);
    Sample<float> s;
    s.clear = read_checked(root, r.clear, 3, r.width, r.height, where);
    s.hazy = read_checked(root, r.hazy, 3, r.width, r.height, where);
    s.transmission = read_checked(root, r.transmission, 1, r.width, r.height, where);
    s.depth = read_checked(root, r.depth, 1, r.width, r.height, where);
    s.params = {r.airlight, r.beta};
    s.scene_id = r.scene_id;
    s.sample_id = r.sample_id;
    s.scene_seed = r.scene_seed;
    for (float& t : s.transmission.data()) t = std::max(t, 1.0f / 65535.0f);
    (r.split == "train" ? data.train : data.validation).push_back(std::move(s));
  }
  return data;
}

}  // namespace drnet
