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

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <string>

#include "commands.hpp"

namespace {

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
    if (c == '"') c = '\'';
  }
  return s;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("drnet");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("DRNET_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = drnet::cli;
  setup_logging();

  CLI::App app{"drnet: single-image dehazing with transmission prediction, residual haze removal "
               "and adversarial refinement"};
  app.require_subcommand(1);

  cli::SynthOptions synth;
  std::vector<std::string> rgbd;
  auto* synth_cmd = app.add_subcommand("synth", "Synthesize a paired hazy dataset and manifest");
  synth_cmd->add_option("--config", synth.config, "Config file (key = value lines)")->required();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--rgbd", rgbd, "IMAGE,DEPTH pair replacing one procedural scene")
      ->delimiter(';');

  cli::TrainOptions train;
  std::string resume;
  auto* train_cmd = app.add_subcommand("train", "Train a stage into a new run directory");
  train_cmd->add_option("--mode", train.mode, "dehaze | refine | ablation")
      ->required()
      ->check(CLI::IsMember({"dehaze", "refine", "ablation"}));
  train_cmd->add_option("--config", train.config, "Config file")->required();
  train_cmd->add_option("--data", train.data, "Dataset manifest")->required();
  train_cmd->add_option("--out", train.out, "Parent directory for run directories")->required();
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from (required for refine)");

  cli::RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Dehaze (and refine) images with a checkpoint");
  run_cmd->add_option("--ckpt", run.checkpoint, "Checkpoint")->required();
  run_cmd->add_option("--stage", run.stage, "dehaze | refine")
      ->check(CLI::IsMember({"dehaze", "refine"}));
  run_cmd->add_option("--in", run.inputs, "Input images (PNG, PPM)")->required();
  run_cmd->add_option("--out", run.out, "Output directory")->required();

  cli::EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
  eval_cmd->add_option("--ckpt", eval.checkpoint, "Checkpoint")->required();
  eval_cmd->add_option("--data", eval.data, "Dataset manifest")->required();
  eval_cmd->add_option("--split", eval.split, "val | train")->check(CLI::IsMember({"val", "train"}));
  eval_cmd->add_option("--out", eval.out, "Report path (a .csv sibling is also written)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error code=usage message=\"" << one_line(e.what()) << "\"\n";
    return 2;
  }

  try {
    if (*synth_cmd) {
      for (const auto& pair : rgbd) {
        const auto comma = pair.find(',');
        if (comma == std::string::npos) {
          throw drnet::Error(drnet::ErrorCode::invalid_argument, "--rgbd expects IMAGE,DEPTH, got " + pair);
        }
        synth.rgbd.emplace_back(pair.substr(0, comma), pair.substr(comma + 1));
      }
      cli::cmd_synth(synth);
    } else if (*train_cmd) {
      if (!resume.empty()) train.resume = resume;
      std::cout << cli::cmd_train(train).string() << "\n";
    } else if (*run_cmd) {
      for (const auto& p : cli::cmd_run(run)) std::cout << p.string() << "\n";
    } else if (*eval_cmd) {
      cli::cmd_eval(eval);
    }
  } catch (const drnet::Error& e) {
    std::cerr << "error code=" << drnet::to_string(e.code()) << " message=\"" << one_line(e.what())
              << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error code=internal message=\"" << one_line(e.what()) << "\"\n";
    return 3;
  }
  return 0;
}
