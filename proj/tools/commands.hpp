/* Copyright 2026 The segloss Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef SEGLOSS_TOOLS_COMMANDS_HPP_
#define SEGLOSS_TOOLS_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "report.hpp"

namespace segloss::cli {

struct CommandResult {
  RunReport report;
  int exit_code = kExitOk;
};

struct EvalOptions {
  std::vector<std::filesystem::path> preds;
  std::vector<std::filesystem::path> gts;
};
CommandResult cmd_eval(const EvalOptions& options);

struct GradcheckOptions {
  std::uint64_t seed = 0;
  int trials = 100;
  int height = 8;
  int width = 8;
  int classes = 5;
  double step = 1e-5;
  double tolerance = 1e-5;
  double alpha = 0.7;
};
CommandResult cmd_gradcheck(const GradcheckOptions& options);

struct SweepOptions {
  double gt = 1000.0;
  double fp_min = 0.0;
  double fp_max = 1000.0;
  double fn_min = 0.0;
  double fn_max = 990.0;
  int steps = 200;
  std::filesystem::path out;
};
CommandResult cmd_sweep(const SweepOptions& options);

// Configuration files are "key = value" lines; '#' starts a comment.
struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir = ".";
};
CommandResult cmd_train(const TrainOptions& options);
CommandResult cmd_warmstart(const TrainOptions& options);

struct RerankOptions {
  std::filesystem::path pred_dir;
  std::filesystem::path proposal_dir;
  std::filesystem::path gt_dir;
  std::string strategy = "kl";
  std::filesystem::path model;
  double lambda_bg = 0.02;
  int random_draws = 20;
  std::uint64_t seed = 0;
};
CommandResult cmd_rerank(const RerankOptions& options);

struct TrainRankerOptions {
  std::vector<std::filesystem::path> train_dirs;
  std::filesystem::path out_model;
  double lambda = 1e-3;
  int epochs = 50;
  double learning_rate = 1e-2;
  std::uint64_t seed = 0;
};
CommandResult cmd_trainranker(const TrainRankerOptions& options);

struct SynthOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int images = 50;
  int height = 32;
  int width = 32;
  int classes = 5;
  int proposals = 10;
  double flip_rate = 0.15;
  int shift_max = 2;
  bool include_gt = false;
  bool embed_prediction = false;
};
CommandResult cmd_synth(const SynthOptions& options);

// Parses argv, runs the subcommand and writes its report. Returns the exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace segloss::cli

#endif  // SEGLOSS_TOOLS_COMMANDS_HPP_
