// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "onegan/config.hpp"
#include "onegan/data.hpp"
#include "onegan/losses.hpp"
#include "onegan/networks.hpp"
#include "onegan/paths.hpp"

namespace onegan {

struct PhaseState {
  int64_t iteration = 0;
  int phase = 1;  // 1 or 2
  bool fake_recon_active = false;
  bool real_recon_active = false;
  bool generators_frozen = false;

  bool operator==(const PhaseState&) const = default;
};

/// Phase I before phase1_iters; then Phase II with fake reconstruction, real
/// reconstruction from phase1_iters + real_recon_delay, generators frozen
/// during the first encoder_warmup_iters of Phase II.
PhaseState phase_schedule(int64_t iteration, const HyperParams& hp, bool phase2_enabled = true,
                          bool real_recon_enabled = true);

/// Image and background discriminators, one pair per path after cloning.
class DiscriminatorBank {
 public:
  explicit DiscriminatorBank(const HyperParams& hp);

  /// Copies the generation-path pair into fresh fake_recon and real_recon
  /// modules. A second call throws StateError.
  void clone();
  bool cloned() const { return cloned_; }

  /// Before cloning only the generation path exists; other tags throw StateError.
  ImageDiscriminator& image(PathTag tag);
  BackgroundDiscriminator& background(PathTag tag);

  int64_t image_count() const;
  int64_t background_count() const;
  std::vector<PathTag> paths() const;

  /// (name, module) pairs for checkpoints, e.g. "d_c.generation".
  std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> modules() const;
  void set_requires_grad(bool on);
  void to(torch::Dtype dtype);

 private:
  HyperParams hp_;
  bool cloned_ = false;
  std::map<PathTag, ImageDiscriminator> image_;
  std::map<PathTag, BackgroundDiscriminator> background_;
};

/// Adam (default moments) per parameter group; each discriminator clone has
/// its own optimizer.
struct OptimizerSet {
  std::unique_ptr<torch::optim::Adam> generators;
  std::unique_ptr<torch::optim::Adam> encoders;
  std::map<PathTag, std::unique_ptr<torch::optim::Adam>> d_image;
  std::map<PathTag, std::unique_ptr<torch::optim::Adam>> d_background;

  /// (name, optimizer) pairs in a fixed order.
  std::vector<std::pair<std::string, torch::optim::Adam*>> all() const;
};

OptimizerSet make_optimizers(GeneratorSet& nets, DiscriminatorBank& bank, const HyperParams& hp);
/// Adds fresh optimizers for discriminators present in the bank but not yet
/// in the set.
void add_clone_optimizers(OptimizerSet& optimizers, DiscriminatorBank& bank, const HyperParams& hp);

/// Per-step record of which discriminator modules received gradient from each
/// path's discriminator loss.
using GradientFlow = std::map<PathTag, std::set<std::string>>;

/// Owns networks, discriminator bank, optimizers, the random source and the
/// batch stream of one training run.
class Trainer {
 public:
  Trainer(Config config, torch::Tensor objects, torch::Tensor backgrounds);

  /// Pulls one batch from the stream and runs training_step.
  std::vector<LossReport> train_iteration();

  /// One alternating step on the given float batches in [-1, 1].
  std::vector<LossReport> training_step(const torch::Tensor& objects,
                                        const torch::Tensor& backgrounds);

  /// Directory with manifest.json and serialized modules, optimizers and
  /// random state.
  void save_checkpoint(const std::filesystem::path& dir) const;
  void load_checkpoint(const std::filesystem::path& dir);

  PhaseState state() const;
  int64_t iteration() const { return iteration_; }
  const Config& config() const { return config_; }
  GeneratorSet& nets() { return nets_; }
  DiscriminatorBank& bank() { return bank_; }
  OptimizerSet& optimizers() { return optimizers_; }
  torch::Generator& rng() { return rng_; }
  const GradientFlow& last_gradient_flow() const { return flow_; }

  /// Parameters of every module, flattened in checkpoint order.
  std::vector<std::pair<std::string, torch::Tensor>> named_state() const;

 private:
  void enter_phase_two();

  Config config_;
  GeneratorSet nets_;
  DiscriminatorBank bank_;
  OptimizerSet optimizers_;
  torch::Generator rng_;
  std::optional<BatchIterator> batches_;
  int64_t iteration_ = 0;
  GradientFlow flow_;
};

/// Config and iteration recorded in a checkpoint manifest.
struct CheckpointInfo {
  Config config;
  int64_t iteration = 0;
  PhaseState state;
  bool bank_cloned = false;
};
CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir);

/// Builds a generator set and loads its parameters from a checkpoint.
std::unique_ptr<GeneratorSet> load_generator_set(const std::filesystem::path& dir,
                                                 CheckpointInfo* info = nullptr);

} // namespace onegan
