// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include <torch/torch.h>

#include "onegan/config.hpp"
#include "onegan/networks.hpp"
#include "onegan/priors.hpp"

namespace onegan {

/// Foreground, background, mask and composite. Images in [-1, 1], mask in [0, 1].
struct ImageQuad {
  torch::Tensor fg;     // [N, 3, H, W]
  torch::Tensor bg;     // [N, 3, H, W]
  torch::Tensor mask;   // [N, 1, H, W]
  torch::Tensor image;  // [N, 3, H, W]
};

/// Per-instance mixing coefficients.
struct MixupCoeffs {
  torch::Tensor beta0;  // [N]
  torch::Tensor beta1;  // [N]

  static MixupCoeffs constant(int64_t batch, double beta0, double beta1);
};

MixupCoeffs sample_mixup(const MixupConfig& config, int64_t batch, torch::Generator& gen);

/// Fixed coefficients for inference: beta0 = beta1 = 1 when
/// `segment_pure_encoder`, otherwise the midpoints of the configured ranges.
MixupCoeffs inference_mixup(const MixupConfig& config, int64_t batch);

struct PathOutput {
  ImageQuad quad;
  /// LUT codes: from the priors (generation) or from predicted classes.
  CodeBundle lut;
  /// Codes actually fed to the generators (mixed codes when autoencoding).
  CodeBundle used;
  torch::Tensor z;          // priors z, or the sampled pose code
  torch::Tensor pre_fg;     // A_fg
  torch::Tensor pre_fg_in;  // tensor fed to G_fg1 (A_fg or A_fg_mix)
  torch::Tensor pre_bg;     // A_bg; undefined when the background bypass is used
  std::optional<PriorBundle> priors;
  std::optional<EncoderPosterior> posterior;
  std::optional<MixupCoeffs> mix;
  torch::Tensor parent_used;  // [N] 0-based class indices selecting the LUT rows
  torch::Tensor child_used;
};

/// I = I_bg * (1 - I_m) + I_fg * I_m, mask broadcast over channels.
torch::Tensor composite(const torch::Tensor& fg, const torch::Tensor& bg, const torch::Tensor& mask);

struct MixedInputs {
  torch::Tensor v_p;
  torch::Tensor v_c;
  torch::Tensor pre_fg;
};

/// v_mix = v_lut * (1 - beta0) + v_enc * beta0; A_mix = A_fg * (1 - beta1) + B_fg * beta1.
MixedInputs dual_mixup(const torch::Tensor& v_p_lut, const torch::Tensor& v_c_lut,
                       const torch::Tensor& v_p_enc, const torch::Tensor& v_c_enc,
                       const torch::Tensor& pre_fg, const torch::Tensor& bypass_fg,
                       const MixupCoeffs& mix);

/// mu + exp(logsig) * eps, eps ~ N(0, I).
torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& logsig,
                             torch::Generator& gen);

/// embed -> G_bg(v_bg, z) -> G_fg(v_p, v_c, z) -> composite. The same z
/// drives both generators.
PathOutput generation_path(const PriorBundle& priors, GeneratorSet& nets);

struct AutoencodeOptions {
  /// 1-based child class replacing the predicted child for the LUT code.
  std::optional<int64_t> class_override;
  bool bypass = true;
  /// Receives step names in execution order.
  std::function<void(std::string_view)> observer;
};

/// Encode (E_p, E_c), sample codes, mix with LUT codes of the predicted
/// classes, render foreground and mask, encode background with that mask,
/// render background from B_bg, composite.
PathOutput autoencode_path(const torch::Tensor& image, GeneratorSet& nets, const MixupCoeffs& mix,
                           torch::Generator& gen, const AutoencodeOptions& options = {});

/// Argmax over the last dimension, lowest index on ties.
torch::Tensor argmax_lowest(const torch::Tensor& logits);

} // namespace onegan
