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

#include "commands.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "drnet/checkpoint.hpp"
#include "drnet/config.hpp"
#include "drnet/image_io.hpp"
#include "drnet/training.hpp"

namespace drnet::cli {
namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorCode::io, "write failed for " + path.string());
}

void append_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  require(static_cast<bool>(out), ErrorCode::io, "cannot write " + path.string());
  out << text;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::io,
          "cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
}

fs::path new_run_dir(const fs::path& out, std::uint64_t seed) {
  ensure_dir(out);
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &utc);
  const std::string base = std::string("run-") + stamp + "-seed" + std::to_string(seed);
  fs::path dir = out / base;
  for (int k = 2; fs::exists(dir); ++k) dir = out / (base + "-" + std::to_string(k));
  ensure_dir(dir);
  return dir;
}

TrainHooks run_hooks(const fs::path& dir, const std::string& prefix, const fs::path& log_path) {
  TrainHooks hooks;
  hooks.on_checkpoint = [dir, prefix](const Checkpoint& ckpt, const std::string& tag) {
    const fs::path path = dir / (prefix + "-" + tag + ".ckpt");
    save_checkpoint(ckpt, path);
    if (tag == "last-good") {
      spdlog::error("saved last finite state to {}", path.string());
    } else {
      spdlog::info("checkpoint {}", path.string());
    }
  };
  hooks.on_record = [log_path](const LogRecord& r) {
    append_text(log_path, TrainLog{{r}}.to_jsonl());
    if (!r.validation.empty()) {
      std::string val;
      for (const auto& [k, v] : r.validation) val += fmt::format(" {}={:.6g}", k, v);
      spdlog::info("[{}] step {} total={:.6g}{}", r.stage, r.step, r.total, val);
    } else if (r.step % 50 == 0) {
      spdlog::debug("[{}] step {} total={:.6g}", r.stage, r.step, r.total);
    }
    if (r.note.rfind("warning", 0) == 0) spdlog::warn("[{}] step {}: {}", r.stage, r.step, r.note);
  };
  return hooks;
}

std::vector<std::string> ids_of(const std::vector<Sample<float>>& split) {
  std::vector<std::string> ids;
  for (const auto& s : split) ids.push_back(sample_label(s.scene_id, s.sample_id));
  return ids;
}

std::vector<Tensor<float>> hazy_of(const std::vector<Sample<float>>& split) {
  std::vector<Tensor<float>> out;
  for (const auto& s : split) out.push_back(s.hazy);
  return out;
}

}  // namespace

Scene<float> load_rgbd(const fs::path& image_path, const fs::path& depth_path) {
  const Image rgb = read_image(image_path);
  const Image depth = read_image(depth_path);
  require(rgb.channels == 3, ErrorCode::unsupported_format,
          image_path.string() + ": expected an RGB image");
  require(depth.channels == 1 && depth.bit_depth == 16, ErrorCode::unsupported_format,
          depth_path.string() + ": depth must be a 16-bit single-channel PNG or PGM (got " +
              std::to_string(depth.bit_depth) + "-bit, " + std::to_string(depth.channels) +
              " channel)");
  require(rgb.width == depth.width && rgb.height == depth.height, ErrorCode::shape_mismatch,
          "rgbd: image is " + std::to_string(rgb.width) + "x" + std::to_string(rgb.height) +
              ", depth is " + std::to_string(depth.width) + "x" + std::to_string(depth.height));
  Scene<float> scene;
  scene.clear = image_to_tensor(rgb);
  scene.depth = Tensor<float>(Shape{1, 1, depth.height, depth.width});
  std::uint16_t max_depth = 0;
  for (std::uint16_t v : depth.samples) max_depth = std::max(max_depth, v);
  if (max_depth > 0) {
    for (std::size_t i = 0; i < depth.samples.size(); ++i) {
      scene.depth[i] = static_cast<float>(depth.samples[i]) / static_cast<float>(max_depth);
    }
  }
  return scene;
}

Manifest cmd_synth(const SynthOptions& options) {
  const RunConfig cfg = load_config(options.config);
  SceneSource<float> source;
  if (!options.rgbd.empty()) {
    const auto scenes = static_cast<std::size_t>(cfg.dataset.train_scenes + cfg.dataset.val_scenes);
    require(options.rgbd.size() == scenes, ErrorCode::config,
            "synth: " + std::to_string(options.rgbd.size()) + " RGB-D pairs given but the config asks for " +
                std::to_string(scenes) + " scenes");
    source = [&](int index, std::uint64_t) {
      const auto& [img, depth] = options.rgbd[static_cast<std::size_t>(index)];
      return load_rgbd(img, depth);
    };
  }
  spdlog::info("synthesizing {} train + {} val scenes x {} renderings", cfg.dataset.train_scenes,
               cfg.dataset.val_scenes, cfg.dataset.samples_per_scene);
  const Dataset<float> data = build_dataset<float>(cfg.dataset, source);

  Manifest manifest;
  manifest.source = options.rgbd.empty() ? "procedural" : "rgbd";
  manifest.config = format_config(cfg);
  for (const char* split : {"train", "val"}) ensure_dir(options.out / split);

  auto emit = [&](const std::vector<Sample<float>>& samples, const std::string& split) {
    for (const auto& s : samples) {
      char scene[32];
      std::snprintf(scene, sizeof(scene), "s%05d", s.scene_id);
      char sample[32];
      std::snprintf(sample, sizeof(sample), "s%05d_h%02d", s.scene_id, s.sample_id);
      ManifestRecord r;
      r.split = split;
      r.scene_id = s.scene_id;
      r.sample_id = s.sample_id;
      r.scene_seed = s.scene_seed;
      r.clear = split + "/" + scene + "_clear.png";
      r.depth = split + "/" + scene + "_depth.png";
      r.hazy = split + "/" + sample + "_hazy.png";
      r.transmission = split + "/" + sample + "_trans.png";
      r.airlight = s.params.airlight;
      r.beta = s.params.beta;
      r.width = s.clear.w();
      r.height = s.clear.h();
      if (s.sample_id == 0) {
        write_image(options.out / r.clear, tensor_to_image(s.clear, 8));
        write_image(options.out / r.depth, tensor_to_image(s.depth, 16));
      }
      write_image(options.out / r.hazy, tensor_to_image(s.hazy, 8));
      write_image(options.out / r.transmission, tensor_to_image(s.transmission, 16));
      manifest.records.push_back(std::move(r));
    }
  };
  emit(data.train, "train");
  emit(data.validation, "val");
  save_manifest(manifest, options.out / "manifest.json");
  write_text(options.out / "config.txt", manifest.config);
  spdlog::info("wrote {} samples to {}", manifest.records.size(), options.out.string());
  return manifest;
}

fs::path cmd_train(const TrainOptions& options) {
  require(options.mode == "dehaze" || options.mode == "refine" || options.mode == "ablation",
          ErrorCode::invalid_argument, "train: mode must be dehaze, refine or ablation");
  require(fs::exists(options.data), ErrorCode::io, "train: manifest not found: " + options.data.string());
  const RunConfig cfg = load_config(options.config);
  const Manifest manifest = load_manifest(options.data);
  const fs::path root = options.data.parent_path();
  validate_manifest(manifest, root);
  const Dataset<float> data = load_dataset(manifest, root);

  std::optional<Checkpoint> resume;
  if (options.resume) resume = load_checkpoint(*options.resume);
  require(options.mode != "refine" || resume.has_value(), ErrorCode::invalid_argument,
          "train: mode refine needs --resume with a dehazing or refinement checkpoint");

  const fs::path dir = new_run_dir(options.out, cfg.train.seed);
  write_text(dir / "config.txt", format_config(cfg));
  spdlog::info("run directory {}", dir.string());

  if (options.mode == "dehaze" || (options.mode == "ablation" && resume)) {
    const std::string prefix = options.mode;
    const fs::path log = dir / (prefix + "_log.jsonl");
    const TrainHooks hooks = run_hooks(dir, prefix, log);
    const Checkpoint* r = resume ? &*resume : nullptr;
    DehazeRun run = options.mode == "dehaze" ? train_dehazing(data, cfg.train, r, hooks)
                                             : train_ablation(data, cfg.train, r, hooks);
    save_checkpoint(run.checkpoint, dir / (prefix + "-final.ckpt"));
  } else if (options.mode == "ablation") {
    AblationStudy study = run_ablation_study(data, cfg.train);
    write_text(dir / "full_log.jsonl", study.full.log.to_jsonl());
    write_text(dir / "ablation_log.jsonl", study.ablation.log.to_jsonl());
    save_checkpoint(study.full.checkpoint, dir / "full-final.ckpt");
    save_checkpoint(study.ablation.checkpoint, dir / "ablation-final.ckpt");
    write_text(dir / "ablation_curves.csv", study.curves_csv);
    const std::string summary =
        "full model reached the ablation's final validation MSE at step: " +
        (study.full_steps_to_ablation_final < 0 ? std::string("never")
                                                 : std::to_string(study.full_steps_to_ablation_final)) +
        "\n";
    write_text(dir / "ablation_summary.txt", summary);
    spdlog::info("{}", summary.substr(0, summary.size() - 1));
  } else {
    const Pipeline pipeline = load_pipeline(*resume, false);
    const int h = cfg.dataset.height;
    const int w = cfg.dataset.width;
    require(!data.validation.empty(), ErrorCode::invalid_argument, "train: validation split is empty");
    const auto heldout = make_heldout_hazy(cfg.train.seed, cfg.refine_pool_scenes, h, w);
    const auto dehazed = dehaze_all(pipeline.model, heldout);
    const auto targets = make_target_pool(cfg.train.seed, cfg.refine_target_scenes, h, w);
    const auto val_hazy = hazy_of(data.validation);
    const auto validation = dehaze_all(pipeline.model, val_hazy);
    const fs::path log = dir / "refine_log.jsonl";
    RefineRun run = train_refinement(dehazed, targets, validation, cfg.train, &*resume,
                                     run_hooks(dir, "refine", log));
    save_checkpoint(run.checkpoint, dir / "refine-final.ckpt");
  }
  return dir;
}

std::vector<fs::path> cmd_run(const RunOptions& options) {
  require(options.stage == "dehaze" || options.stage == "refine", ErrorCode::invalid_argument,
          "run: stage must be dehaze or refine");
  require(!options.inputs.empty(), ErrorCode::invalid_argument, "run: no input images");
  const Pipeline pipeline = load_pipeline(load_checkpoint(options.checkpoint), options.stage == "refine");
  ensure_dir(options.out);
  std::vector<fs::path> written;
  for (const auto& input : options.inputs) {
    const Image img = read_image(input);
    require(img.channels == 3, ErrorCode::unsupported_format, input.string() + ": expected an RGB image");
    const Tensor<float> hazy = image_to_tensor(img);
    const PipelineOutput out =
        run_pipeline(hazy, pipeline.model, pipeline.generator ? &*pipeline.generator : nullptr);
    const std::string stem = input.stem().string();
    auto put = [&](const std::string& suffix, const Tensor<float>& t, int bits) {
      const fs::path path = options.out / (stem + suffix);
      write_image(path, tensor_to_image(t, bits));
      written.push_back(path);
    };
    if (!out.transmission.empty()) put("_transmission.png", out.transmission, 16);
    put("_dehazed.png", out.dehazed, 8);
    if (!out.refined.empty()) put("_refined.png", out.refined, 8);
    spdlog::info("{}: {}x{}", input.string(), img.width, img.height);
  }
  return written;
}

std::vector<EvalReport> cmd_eval(const EvalOptions& options) {
  require(options.split == "val" || options.split == "train", ErrorCode::invalid_argument,
          "eval: split must be val or train");
  const Checkpoint ckpt = load_checkpoint(options.checkpoint);
  const bool refine = ckpt.find("generator.conv1.kernel") != nullptr;
  const Pipeline pipeline = load_pipeline(ckpt, refine);
  const Manifest manifest = load_manifest(options.data);
  const Dataset<float> data = load_dataset(manifest, options.data.parent_path());
  const auto& split = options.split == "val" ? data.validation : data.train;
  require(!split.empty(), ErrorCode::invalid_argument, "eval: split '" + options.split + "' is empty");

  RunConfig base;
  try {
    base = parse_config(manifest.config, "manifest config");
  } catch (const Error&) {
    spdlog::warn("manifest config unreadable; using default SSIM settings");
  }
  const SsimConfig& ssim = base.train.ssim;

  std::vector<Tensor<float>> dehazed, refined, truths;
  for (const auto& s : split) {
    PipelineOutput out =
        run_pipeline(s.hazy, pipeline.model, pipeline.generator ? &*pipeline.generator : nullptr);
    dehazed.push_back(std::move(out.dehazed));
    if (refine) refined.push_back(std::move(out.refined));
    truths.push_back(s.clear);
  }
  const auto ids = ids_of(split);
  const std::string stage = ckpt.meta("stage");
  std::vector<EvalReport> reports;
  reports.push_back(evaluate_dataset<float>(dehazed, truths, ids,
                                            stage == "ablation" ? "ablation" : "dehaze",
                                            options.split, ssim));
  if (refine) reports.push_back(evaluate_dataset<float>(refined, truths, ids, "refine", options.split, ssim));
  BaselineReports baselines = baseline_report<float>(split, options.split, ssim);
  reports.push_back(std::move(baselines.identity));
  reports.push_back(std::move(baselines.oracle));

  if (options.out.has_parent_path()) ensure_dir(options.out.parent_path());
  write_text(options.out, format_report_table(reports, ssim));
  write_text(fs::path(options.out.string() + ".csv"), format_report_csv(reports));
  for (const auto& r : reports) {
    spdlog::info("{:>9}: mse_8bit={:.2f} psnr={:.3f} dB ssim={:.4f}", r.method, r.average.mse_8bit,
                 r.average.psnr, r.average.ssim);
  }
  return reports;
}

}  // namespace drnet::cli
