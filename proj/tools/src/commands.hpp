// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the `onegan` executable. Each returns a
// process exit status and reports errors as exceptions from onegan/errors.hpp.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "onegan/config.hpp"
#include "onegan/eval.hpp"
#include "onegan/networks.hpp"

namespace onegan::cli {

namespace fs = std::filesystem;

struct TrainArgs {
  fs::path config;
  fs::path out;  // run directory
  bool resume = false;
  std::optional<uint64_t> seed;
  std::string ablation = "none";
  /// Stop early after this many iterations in this invocation (tests).
  std::optional<int64_t> max_steps;
};

struct GenerateArgs {
  fs::path checkpoint;
  fs::path out;  // PNG file
  std::vector<int64_t> children;  // 1-based; empty = every child class
  int64_t columns = 8;
  uint64_t seed = 0;
  bool decompose = false;
  bool shared_z = false;
};

struct InferArgs {
  fs::path checkpoint;
  std::string task;  // segment, reconstruct, remove, translate, cluster
  std::vector<fs::path> inputs;  // image files or directories
  fs::path out;
  uint64_t seed = 0;
  std::vector<int64_t> target_children;  // translate only, 1-based
  std::optional<int64_t> k;              // cluster only
};

struct EvalArgs {
  fs::path checkpoint;
  fs::path data;  // dataset root; empty = the checkpoint's data root
  std::vector<std::string> metrics{"iou", "dice", "nmi", "ami", "cis"};
  std::string ablation = "none";
  fs::path out;  // results file
  uint64_t seed = 0;
  int64_t per_class = 50;  // generated images per child class for C-IS
};

struct SynthArgs {
  fs::path out;
  int64_t n_parent = 3;
  int64_t colors_per_shape = 4;
  int64_t image_size = 64;
  int64_t count = 2000;
  int64_t backgrounds = 500;
  int64_t eval_count = 200;
  int64_t oracle_count = 1200;
  uint64_t seed = 0;
};

struct IngestArgs {
  fs::path dataset;
  fs::path boxes;
  fs::path out;
  int64_t image_size = 128;
  uint64_t seed = 0;
};

int cmd_train(const TrainArgs& args, std::ostream& log);
int cmd_generate(const GenerateArgs& args, std::ostream& log);
int cmd_infer(const InferArgs& args, std::ostream& log);
int cmd_eval(const EvalArgs& args, std::ostream& log);
int cmd_synth(const SynthArgs& args, std::ostream& log);
int cmd_ingest(const IngestArgs& args, std::ostream& log);

/// Metrics computed by cmd_eval, also returned for programmatic callers.
std::vector<MetricReport> evaluate(GeneratorSet& nets, const Config& config, const fs::path& data,
                                   const std::vector<std::string>& metrics, uint64_t seed,
                                   int64_t per_class, int64_t iteration, std::ostream& log);

/// Generation grid: one row (or four with `decompose`: image, foreground,
/// mask, background) per child class, one z per column. uint8 [3, H', W'].
torch::Tensor generation_grid(GeneratorSet& nets, const std::vector<int64_t>& children,
                              int64_t columns, uint64_t seed, bool decompose, bool shared_z);

/// Path of the most recent checkpoint under `<run>/checkpoints`, if any.
std::optional<fs::path> latest_checkpoint(const fs::path& run_dir);

/// Resolves a data root that may be relative to the config file's directory.
fs::path resolve_data_root(const Config& config, const fs::path& config_file);

} // namespace onegan::cli
