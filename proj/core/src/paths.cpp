// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "onegan/paths.hpp"

#include "onegan/errors.hpp"

namespace onegan {

namespace {

void notify(const AutoencodeOptions& options, std::string_view step) {
  if (options.observer) options.observer(step);
}

torch::Tensor as_column(const torch::Tensor& beta, int64_t dims) {
  std::vector<int64_t> shape(static_cast<std::size_t>(dims), 1);
  shape[0] = beta.size(0);
  return beta.view(shape);
}

void check_beta(const torch::Tensor& beta, const char* name) {
  if (beta.numel() == 0) return;
  if (beta.min().item<double>() < 0.0 || beta.max().item<double>() > 1.0) {
    throw ValidationError(std::string(name) + " outside [0, 1]");
  }
}

} // namespace

MixupCoeffs MixupCoeffs::constant(int64_t batch, double beta0, double beta1) {
  return {torch::full({batch}, beta0), torch::full({batch}, beta1)};
}

MixupCoeffs sample_mixup(const MixupConfig& config, int64_t batch, torch::Generator& gen) {
  config.validate();
  auto draw = [&](double lo, double hi) {
    return torch::rand({batch}, gen) * (hi - lo) + lo;
  };
  MixupCoeffs mix;
  mix.beta0 = draw(config.beta0_lo, config.beta0_hi);
  mix.beta1 = draw(config.beta1_lo, config.beta1_hi);
  return mix;
}

MixupCoeffs inference_mixup(const MixupConfig& config, int64_t batch) {
  if (config.segment_pure_encoder) return MixupCoeffs::constant(batch, 1.0, 1.0);
  return MixupCoeffs::constant(batch, 0.5 * (config.beta0_lo + config.beta0_hi),
                               0.5 * (config.beta1_lo + config.beta1_hi));
}

torch::Tensor composite(const torch::Tensor& fg, const torch::Tensor& bg, const torch::Tensor& mask) {
  if (fg.sizes() != bg.sizes() || fg.dim() != 4 || mask.dim() != 4 || mask.size(1) != 1 ||
      mask.size(0) != fg.size(0) || mask.size(2) != fg.size(2) || mask.size(3) != fg.size(3)) {
    throw ShapeError("composite: inconsistent shapes fg " + c10::str(fg.sizes()) + ", bg " +
                     c10::str(bg.sizes()) + ", mask " + c10::str(mask.sizes()));
  }
  return bg * (1 - mask) + fg * mask;
}

MixedInputs dual_mixup(const torch::Tensor& v_p_lut, const torch::Tensor& v_c_lut,
                       const torch::Tensor& v_p_enc, const torch::Tensor& v_c_enc,
                       const torch::Tensor& pre_fg, const torch::Tensor& bypass_fg,
                       const MixupCoeffs& mix) {
  check_beta(mix.beta0, "beta0");
  check_beta(mix.beta1, "beta1");
  if (v_p_lut.sizes() != v_p_enc.sizes() || v_c_lut.sizes() != v_c_enc.sizes() ||
      pre_fg.sizes() != bypass_fg.sizes()) {
    throw ShapeError("dual_mixup: paired inputs must have equal shapes");
  }
  const auto b0 = as_column(mix.beta0, 2).to(v_p_lut.dtype());
  const auto b1 = as_column(mix.beta1, 4).to(pre_fg.dtype());
  MixedInputs out;
  out.v_p = v_p_lut * (1 - b0) + v_p_enc * b0;
  out.v_c = v_c_lut * (1 - b0) + v_c_enc * b0;
  out.pre_fg = pre_fg * (1 - b1) + bypass_fg * b1;
  return out;
}

torch::Tensor reparameterize(const torch::Tensor& mu, const torch::Tensor& logsig,
                             torch::Generator& gen) {
  if (mu.sizes() != logsig.sizes()) throw ShapeError("reparameterize: mu/logsig shape mismatch");
  auto eps = torch::randn(mu.sizes(), gen, mu.options().requires_grad(false));
  return mu + torch::exp(logsig) * eps;
}

torch::Tensor argmax_lowest(const torch::Tensor& logits) {
  // torch::argmax returns the first maximal index.
  return torch::argmax(logits, -1);
}

PathOutput generation_path(const PriorBundle& priors, GeneratorSet& nets) {
  PathOutput out;
  const auto dtype = nets.lut->v_c->weight.scalar_type();
  auto codes = nets.lut->forward(priors.e_bg.to(dtype), priors.e_p.to(dtype), priors.e_c.to(dtype));
  auto z = priors.z.to(dtype);
  out.pre_bg = nets.g_bg->pre_image(codes.v_bg, z);
  out.quad.bg = nets.g_bg->render(out.pre_bg);
  out.pre_fg = nets.g_fg->pre_image(codes.v_p, z);
  out.pre_fg_in = out.pre_fg;
  std::tie(out.quad.fg, out.quad.mask) = nets.g_fg->render(out.pre_fg, codes.v_p, codes.v_c);
  out.quad.image = composite(out.quad.fg, out.quad.bg, out.quad.mask);
  out.lut = codes;
  out.used = codes;
  out.z = z;
  out.priors = priors;
  out.parent_used = priors.parent;
  out.child_used = priors.child;
  return out;
}

PathOutput autoencode_path(const torch::Tensor& image, GeneratorSet& nets, const MixupCoeffs& mix,
                           torch::Generator& gen, const AutoencodeOptions& options) {
  const auto& hp = nets.hp;
  if (!nets.e_p || !nets.e_c || !nets.e_bg) throw ConfigError("autoencode_path: encoders missing");
  if (mix.beta0.size(0) != image.size(0) || mix.beta1.size(0) != image.size(0)) {
    throw ShapeError("autoencode_path: one mixup pair per instance required");
  }

  // (1) content and style encoding, code sampling, LUT codes of predicted classes.
  notify(options, "encode_content");
  auto content = nets.e_p->forward(image);
  notify(options, "encode_style");
  auto style = nets.e_c->forward(image);

  EncoderPosterior post = content;
  post.logits_c = style.logits_c;
  post.mu_c = style.mu_c;
  post.logsig_c = style.logsig_c;

  auto z_hat = reparameterize(post.mu_z, post.logsig_z, gen);
  auto v_p_hat = reparameterize(post.mu_p, post.logsig_p, gen);
  auto v_c_hat = reparameterize(post.mu_c, post.logsig_c, gen);

  const auto batch = image.size(0);
  auto parent = argmax_lowest(post.logits_p.detach());
  torch::Tensor child;
  if (options.class_override) {
    const int64_t k = *options.class_override;
    if (k < 1 || k > hp.n_child) throw ValidationError("class_override outside [1, n_child]");
    child = torch::full({batch}, k - 1, torch::kLong);
  } else {
    child = argmax_lowest(post.logits_c.detach());
  }
  const auto dtype = image.scalar_type();
  auto e_p = onehot_rows(parent, hp.n_parent).to(dtype);
  auto lut = nets.lut->forward(e_p, e_p, onehot_rows(child, hp.n_child).to(dtype));

  // (2) foreground and mask from the mixed codes.
  auto b0 = mix.beta0.to(dtype).view({batch, 1});
  auto v_p_mix = lut.v_p * (1 - b0) + v_p_hat * b0;
  auto pre_fg = nets.g_fg->pre_image(v_p_mix, z_hat);
  auto mixed = dual_mixup(lut.v_p, lut.v_c, v_p_hat, v_c_hat, pre_fg, post.bypass_fg, mix);
  auto pre_in = options.bypass ? mixed.pre_fg : pre_fg;

  notify(options, "generate_foreground");
  PathOutput out;
  std::tie(out.quad.fg, out.quad.mask) = nets.g_fg->render(pre_in, mixed.v_p, mixed.v_c);

  // (3) background encoding needs the mask, hence runs after (2).
  notify(options, "encode_background");
  post.bypass_bg = nets.e_bg->forward(image, out.quad.mask);

  // (4) background from the bypass, which replaces A_bg.
  notify(options, "generate_background");
  if (options.bypass) {
    out.quad.bg = nets.g_bg->render(post.bypass_bg);
  } else {
    out.pre_bg = nets.g_bg->pre_image(lut.v_bg, z_hat);
    out.quad.bg = nets.g_bg->render(out.pre_bg);
  }

  // (5) composite.
  notify(options, "composite");
  out.quad.image = composite(out.quad.fg, out.quad.bg, out.quad.mask);

  out.lut = lut;
  out.used = CodeBundle{lut.v_bg, mixed.v_p, mixed.v_c};
  out.z = z_hat;
  out.pre_fg = pre_fg;
  out.pre_fg_in = pre_in;
  out.posterior = post;
  out.mix = mix;
  out.parent_used = parent;
  out.child_used = child;
  return out;
}

} // namespace onegan
