// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace onegan {

/// Model and schedule hyperparameters. Defaults reproduce the full-scale
/// Birds setting; desk-scale runs override them from a config file.
struct HyperParams {
  int64_t n_child = 200;
  int64_t n_parent = 20;
  int64_t d_z = 100;
  int64_t d_c = 32;
  int64_t d_p = 16;
  int64_t d_bg = 32;
  int64_t image_size = 128;
  /// Uniform multiplier on every table channel width (1.0 = table widths).
  double channel_scale = 1.0;
  int64_t batch_size = 20;
  double lr = 2e-4;
  int64_t total_iters = 600000;
  int64_t phase1_iters = 200000;
  int64_t real_recon_delay = 200000;
  /// Length of the generator freeze at the start of Phase II.
  int64_t encoder_warmup_iters = 5000;

  /// Throws ValidationError when an invariant is broken.
  void validate() const;

  /// Channel width of a table entry after channel_scale (at least 1).
  int64_t width(int64_t table_channels) const;

  /// Spatial side of a table entry defined at 128 px, rescaled to image_size.
  int64_t side(int64_t table_side) const { return table_side * image_size / 128; }
};

struct LossWeights {
  double w_bg_adv = 10.0;
  double w_regv = 0.1;
  double w_mask = 2.0;
  double w_mask_d = 0.1;
  double w_class = 1.0;
  double w_mse = 1.0;
  double w_adv = 1.0;
  double w_vae = 1.0;
  double w_rec = 1.0;
  double w_per = 1.0;

  void validate() const;
};

enum class GanLoss { bce, hinge };

struct MixupConfig {
  double beta0_lo = 0.0;
  double beta0_hi = 1.0;
  double beta1_lo = 0.5;
  double beta1_hi = 1.0;
  /// Encoder bypasses feed the generators during autoencoding.
  bool bypass = true;
  /// Segmentation inference uses beta0 = beta1 = 1 (pure encoder information).
  bool segment_pure_encoder = true;

  void validate() const;
};

struct TrainOptions {
  uint64_t seed = 0;
  int64_t checkpoint_every = 10000;
  int64_t sample_every = 5000;
  int64_t log_every = 1;
  bool hflip = true;
  GanLoss gan_loss = GanLoss::bce;
  /// Distance losses back-propagate into the generator side too.
  bool mse_grad_to_generators = true;
  /// Parent class drawn independently of the child instead of from the
  /// fixed child-to-parent hierarchy.
  bool independent_parent = false;
  bool phase2_enabled = true;
  bool real_recon_enabled = true;
  std::string data_root;
  std::string ablation = "none";
};

struct Config {
  HyperParams hp;
  LossWeights weights;
  MixupConfig mixup;
  TrainOptions train;

  void validate() const;
};

/// Reads an INI-style file ([model], [train], [loss], [mixup], [data]).
/// Missing keys keep their defaults; unknown keys are rejected.
Config load_config(const std::filesystem::path& path);
Config parse_config(std::string_view text);
void save_config(const Config& config, const std::filesystem::path& path);
std::string format_config(const Config& config);

/// Ablation tags: none, no-mixup, full-mixup, no-bypass, no-mask-reg,
/// phase-I-only, no-multi-phase, no-real-recon.
void apply_ablation(Config& config, std::string_view tag);
bool is_known_ablation(std::string_view tag);

/// Short stable digest of the effective configuration.
std::string config_digest(const Config& config);

} // namespace onegan
