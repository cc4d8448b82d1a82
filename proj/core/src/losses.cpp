// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "onegan/losses.hpp"

#include <iomanip>
#include <sstream>

#include "onegan/errors.hpp"

namespace F = torch::nn::functional;

namespace onegan {

namespace {

// -log sigmoid(x), averaged.
torch::Tensor bce_positive(const torch::Tensor& logits) {
  return F::softplus(-logits).mean();
}

// -log(1 - sigmoid(x)), averaged.
torch::Tensor bce_negative(const torch::Tensor& logits) {
  return F::softplus(logits).mean();
}

torch::Tensor generator_term(const torch::Tensor& logits, GanLoss kind) {
  return kind == GanLoss::bce ? bce_positive(logits) : -logits.mean();
}

torch::Tensor discriminator_head(const torch::Tensor& positive, const torch::Tensor& negative,
                                 GanLoss kind) {
  if (!positive.defined() || !negative.defined() || positive.numel() == 0 ||
      negative.numel() == 0) {
    throw ValidationError("adversarial_d_loss: empty real or fake batch");
  }
  if (kind == GanLoss::bce) return 0.5 * (bce_positive(positive) + bce_negative(negative));
  return 0.5 * (torch::relu(1 - positive).mean() + torch::relu(1 + negative).mean());
}

void require_same(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (a.sizes() != b.sizes()) {
    throw ShapeError(std::string(what) + ": shape mismatch " + c10::str(a.sizes()) + " vs " +
                     c10::str(b.sizes()));
  }
}

torch::Tensor mse(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  require_same(a, b, what);
  return (a - b).pow(2).mean();
}

torch::Tensor l1(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  require_same(a, b, what);
  return (a - b).abs().mean();
}

const torch::Tensor& member(const LossTerms& terms, const std::string& name) {
  auto it = terms.find(name);
  if (it == terms.end() || !it->second.defined()) {
    throw ValidationError("total_losses: missing member " + name);
  }
  return it->second;
}

} // namespace

std::string_view to_string(PathTag tag) {
  switch (tag) {
    case PathTag::generation: return "generation";
    case PathTag::fake_recon: return "fake_recon";
    case PathTag::real_recon: return "real_recon";
  }
  return "unknown";
}

PathTag path_tag_from_string(std::string_view name) {
  if (name == "generation") return PathTag::generation;
  if (name == "fake_recon") return PathTag::fake_recon;
  if (name == "real_recon") return PathTag::real_recon;
  throw ValidationError("unknown path tag: " + std::string(name));
}

AdversarialTerms adversarial_g_loss(const torch::Tensor& bg_real_fake_logits,
                                    const torch::Tensor& bg_background_logits,
                                    const torch::Tensor& image_real_fake_logits,
                                    const LossWeights& weights, GanLoss kind) {
  AdversarialTerms t;
  t.bg_real_fake = generator_term(bg_real_fake_logits, kind);
  t.bg_background = generator_term(bg_background_logits, kind);
  t.image_real_fake = generator_term(image_real_fake_logits, kind);
  t.total = weights.w_bg_adv * t.bg_real_fake + t.bg_background + t.image_real_fake;
  return t;
}

AdversarialTerms adversarial_d_loss(const DiscriminatorLogits& logits, const LossWeights& weights,
                                    GanLoss kind) {
  AdversarialTerms t;
  t.bg_real_fake = discriminator_head(logits.bg_rf_real, logits.bg_rf_fake, kind);
  t.bg_background = discriminator_head(logits.bg_bg_real, logits.bg_bg_object, kind);
  t.image_real_fake = discriminator_head(logits.img_rf_real, logits.img_rf_fake, kind);
  t.total = weights.w_bg_adv * t.bg_real_fake + t.bg_background + t.image_real_fake;
  return t;
}

torch::Tensor classification_loss(const torch::Tensor& disc_class_logits,
                                  const torch::Tensor& logits_p, const torch::Tensor& logits_c,
                                  const torch::Tensor& parent, const torch::Tensor& child,
                                  PathTag tag) {
  if (tag == PathTag::real_recon) {
    throw UsageError("classification_loss: real images carry no class labels");
  }
  auto ce = [](const torch::Tensor& logits, const torch::Tensor& labels) {
    return F::cross_entropy(logits, labels.to(torch::kLong));
  };
  return ce(disc_class_logits, child) + ce(logits_p, parent) + ce(logits_c, child);
}

torch::Tensor distance_loss(const torch::Tensor& v_c, const torch::Tensor& mu_c,
                            const torch::Tensor& v_p, const torch::Tensor& mu_p,
                            const torch::Tensor& pre_fg, const torch::Tensor& bypass_fg,
                            const torch::Tensor& pre_bg, const torch::Tensor& bypass_bg) {
  return mse(v_c, mu_c, "distance v_c") + mse(v_p, mu_p, "distance v_p") +
         mse(pre_fg, bypass_fg, "distance A_fg/B_fg") + mse(pre_bg, bypass_bg, "distance A_bg/B_bg");
}

torch::Tensor code_regularization(const torch::Tensor& v_p, const torch::Tensor& v_c,
                                  const torch::Tensor& v_bg) {
  auto sq = [](const torch::Tensor& v) { return v.pow(2).flatten(1).sum(1); };
  return (sq(v_p) + sq(v_c) + sq(v_bg)).mean();
}

MaskRegularization mask_regularization(const torch::Tensor& mask, double w_mask_d) {
  if (mask.numel() == 0) throw ValidationError("mask_regularization: empty mask batch");
  if (mask.min().item<double>() < 0.0 || mask.max().item<double>() > 1.0) {
    throw ValidationError("mask_regularization: mask values outside [0, 1]");
  }
  auto flat = mask.flatten(1);
  auto signed_mask = 2 * flat - 1;
  MaskRegularization r;
  r.balance = (flat.mean(1) - 0.5).abs().mean();
  r.decisive = ((torch::clamp_min(signed_mask, 0).mean(1) - 0.5).abs() +
                (torch::clamp_max(signed_mask, 0).mean(1) + 0.5).abs())
                   .mean();
  r.total = r.balance + w_mask_d * r.decisive;
  return r;
}

torch::Tensor gaussian_kl(const torch::Tensor& mu, const torch::Tensor& logsig,
                          const torch::Tensor& target) {
  require_same(mu, logsig, "gaussian_kl mu/logsig");
  require_same(mu, target, "gaussian_kl mu/target");
  auto var = torch::exp(2 * logsig);
  auto per_dim = 0.5 * (var + (mu - target).pow(2) - 1 - 2 * logsig);
  return per_dim.flatten(1).sum(1).mean();
}

KlTerms vae_kl_loss(const EncoderPosterior& posterior, const torch::Tensor& target_p,
                    const torch::Tensor& target_c) {
  KlTerms k;
  k.p = gaussian_kl(posterior.mu_p, posterior.logsig_p, target_p);
  k.c = gaussian_kl(posterior.mu_c, posterior.logsig_c, target_c);
  k.z = gaussian_kl(posterior.mu_z, posterior.logsig_z, torch::zeros_like(posterior.mu_z));
  k.total = k.p + k.c + k.z;
  return k;
}

torch::Tensor reconstruction_loss(const ImageQuad& target, const ImageQuad& output, PathTag tag) {
  if (tag == PathTag::generation) throw UsageError("reconstruction_loss: needs a recon tag");
  auto loss = l1(target.image, output.image, "reconstruction image");
  if (tag == PathTag::fake_recon) {
    if (!target.bg.defined() || !target.mask.defined()) {
      throw UsageError("reconstruction_loss: fake tag requires background and mask targets");
    }
    loss = loss + l1(target.bg, output.bg, "reconstruction background") +
           l1(target.mask, output.mask, "reconstruction mask");
  }
  return loss;
}

torch::Tensor feature_distance(const torch::Tensor& a, const torch::Tensor& b) {
  return mse(a, b, "feature_distance");
}

torch::Tensor perceptual_loss(const ImageQuad& target, const ImageQuad& output,
                              ImageDiscriminator& d_image, BackgroundDiscriminator* d_background,
                              PathTag tag) {
  if (tag == PathTag::generation) throw UsageError("perceptual_loss: needs a recon tag");
  if (!d_image) throw UsageError("perceptual_loss: missing D_c feature head");
  auto loss = feature_distance(d_image->features(target.image), d_image->features(output.image));
  if (tag == PathTag::fake_recon) {
    if (d_background == nullptr || !*d_background) {
      throw UsageError("perceptual_loss: missing D_bg feature head");
    }
    loss = loss + feature_distance((*d_background)->features(target.bg),
                                   (*d_background)->features(output.bg));
  }
  return loss;
}

LossTotals total_losses(const LossTerms& terms, const LossWeights& weights, PathTag tag) {
  LossTotals t;
  t.gen = weights.w_class * member(terms, "L_E") + weights.w_mse * member(terms, "L_MSE") +
          weights.w_regv * member(terms, "L_REG_v") + weights.w_adv * member(terms, "L_G") +
          weights.w_mask * member(terms, "L_M");
  if (tag != PathTag::generation) {
    t.ae = t.gen + weights.w_vae * member(terms, "L_VAE") + weights.w_rec * member(terms, "L_REC") +
           weights.w_per * member(terms, "L_PER");
  }
  if (auto it = terms.find("L_D"); it != terms.end() && it->second.defined()) t.d = it->second;
  return t;
}

std::string LossReport::to_line() const {
  std::ostringstream os;
  os << "iter=" << iteration << " path=" << to_string(tag);
  os << std::setprecision(9);
  for (const auto& [name, value] : values) os << ' ' << name << '=' << value;
  return os.str();
}

LossReport LossReport::from_line(std::string_view line) {
  LossReport r;
  std::istringstream in{std::string(line)};
  std::string token;
  while (in >> token) {
    auto eq = token.find('=');
    if (eq == std::string::npos) throw ValidationError("malformed loss report token: " + token);
    auto key = token.substr(0, eq);
    auto value = token.substr(eq + 1);
    if (key == "iter") {
      r.iteration = std::stoll(value);
    } else if (key == "path") {
      r.tag = path_tag_from_string(value);
    } else {
      r.values[key] = std::stod(value);
    }
  }
  return r;
}

LossReport make_report(const LossTerms& terms, const LossTotals& totals, PathTag tag,
                       int64_t iteration) {
  LossReport r;
  r.tag = tag;
  r.iteration = iteration;
  for (const auto& [name, value] : terms) {
    if (value.defined()) r.values[name] = value.item<double>();
  }
  if (totals.gen.defined()) r.values["L_GEN"] = totals.gen.item<double>();
  if (totals.ae.defined()) r.values["L_AE"] = totals.ae.item<double>();
  if (totals.d.defined()) r.values["L_D"] = totals.d.item<double>();
  return r;
}

} // namespace onegan
