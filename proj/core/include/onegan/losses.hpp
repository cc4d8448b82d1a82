// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include <torch/torch.h>

#include "onegan/config.hpp"
#include "onegan/networks.hpp"
#include "onegan/paths.hpp"

namespace onegan {

enum class PathTag { generation, fake_recon, real_recon };

std::string_view to_string(PathTag tag);
PathTag path_tag_from_string(std::string_view name);

/// Adversarial terms seen by the generators. `total` already carries the
/// w_bg_adv weight on the background real/fake term.
struct AdversarialTerms {
  torch::Tensor bg_real_fake;
  torch::Tensor bg_background;
  torch::Tensor image_real_fake;
  torch::Tensor total;
};

/// Non-saturating generator loss: -[w log s(D_bg_A) + log s(D_bg_B) + log s(D_c_A)],
/// each averaged over patches and batch.
AdversarialTerms adversarial_g_loss(const torch::Tensor& bg_real_fake_logits,
                                    const torch::Tensor& bg_background_logits,
                                    const torch::Tensor& image_real_fake_logits,
                                    const LossWeights& weights, GanLoss kind = GanLoss::bce);

/// Discriminator logits for one adversarial pair.
struct DiscriminatorLogits {
  torch::Tensor bg_rf_real;     // D_bg_A on real backgrounds
  torch::Tensor bg_rf_fake;     // D_bg_A on generated backgrounds
  torch::Tensor bg_bg_real;     // D_bg_B on real backgrounds
  torch::Tensor bg_bg_object;   // D_bg_B on real object images
  torch::Tensor img_rf_real;    // D_c_A on real object images
  torch::Tensor img_rf_fake;    // D_c_A on generated images
};

/// Each head is the binary cross-entropy averaged over its positive and
/// negative sets (0.5 * (BCE_pos + BCE_neg)); heads combined with w_bg_adv
/// on D_bg_A.
AdversarialTerms adversarial_d_loss(const DiscriminatorLogits& logits, const LossWeights& weights,
                                    GanLoss kind = GanLoss::bce);

/// CE(D_c_B(I), phi_c) + CE(e_hat_p, phi_p) + CE(e_hat_c, phi_c); classes 0-based.
torch::Tensor classification_loss(const torch::Tensor& disc_class_logits,
                                  const torch::Tensor& logits_p, const torch::Tensor& logits_c,
                                  const torch::Tensor& parent, const torch::Tensor& child,
                                  PathTag tag = PathTag::generation);

/// MSE(v_c, mu_c) + MSE(v_p, mu_p) + MSE(A_fg, B_fg) + MSE(A_bg, B_bg).
torch::Tensor distance_loss(const torch::Tensor& v_c, const torch::Tensor& mu_c,
                            const torch::Tensor& v_p, const torch::Tensor& mu_p,
                            const torch::Tensor& pre_fg, const torch::Tensor& bypass_fg,
                            const torch::Tensor& pre_bg, const torch::Tensor& bypass_bg);

/// ||v_p||^2 + ||v_c||^2 + ||v_bg||^2 per instance, averaged over the batch.
torch::Tensor code_regularization(const torch::Tensor& v_p, const torch::Tensor& v_c,
                                  const torch::Tensor& v_bg);

struct MaskRegularization {
  torch::Tensor balance;   // L_M_B
  torch::Tensor decisive;  // L_M_D
  torch::Tensor total;     // L_M_B + w_mask_d * L_M_D
};

/// Mask batch [N, 1, H, W] or [N, H, W] with values in [0, 1].
MaskRegularization mask_regularization(const torch::Tensor& mask, double w_mask_d = 0.1);

struct KlTerms {
  torch::Tensor p, c, z, total;
};

/// Closed-form KL of diagonal Gaussians to N(target, I): 0.5 * sum(s^2 + (mu - t)^2 - 1 - ln s^2),
/// summed over dimensions and averaged over the batch.
torch::Tensor gaussian_kl(const torch::Tensor& mu, const torch::Tensor& logsig,
                          const torch::Tensor& target);

KlTerms vae_kl_loss(const EncoderPosterior& posterior, const torch::Tensor& target_p,
                    const torch::Tensor& target_c);

/// real: L1(I, I^); fake: adds L1 on background and mask. `target` carries
/// the input quad; for the real tag only `target.image` is read.
torch::Tensor reconstruction_loss(const ImageQuad& target, const ImageQuad& output, PathTag tag);

/// Mean squared distance between feature maps.
torch::Tensor feature_distance(const torch::Tensor& a, const torch::Tensor& b);

/// real: ||D_c_C(I) - D_c_C(I^)||^2; fake adds ||D_bg_C(I_bg) - D_bg_C(I^_bg)||^2.
torch::Tensor perceptual_loss(const ImageQuad& target, const ImageQuad& output,
                              ImageDiscriminator& d_image, BackgroundDiscriminator* d_background,
                              PathTag tag);

/// Named scalar terms of one path. Members of L_GEN: L_E, L_MSE, L_REG_v,
/// L_G, L_M. Extra members of L_AE: L_VAE, L_REC, L_PER. L_D stands alone.
using LossTerms = std::map<std::string, torch::Tensor>;

struct LossTotals {
  torch::Tensor gen;
  torch::Tensor ae;  // undefined for the generation path
  torch::Tensor d;   // undefined when L_D is absent
};

/// Weighted sums; a missing member of an active aggregate throws ValidationError.
LossTotals total_losses(const LossTerms& terms, const LossWeights& weights, PathTag tag);

/// Scalar snapshot of a path's terms and aggregates.
struct LossReport {
  PathTag tag = PathTag::generation;
  int64_t iteration = 0;
  std::map<std::string, double> values;

  /// One line: `iter=<n> path=<tag> name=value ...`.
  std::string to_line() const;
  static LossReport from_line(std::string_view line);
};

LossReport make_report(const LossTerms& terms, const LossTotals& totals, PathTag tag,
                       int64_t iteration);

} // namespace onegan
