// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "onegan/networks.hpp"

#include <string>

#include "onegan/errors.hpp"

namespace F = torch::nn::functional;

namespace onegan {

namespace {

void record(ShapeTrace* trace, std::string label, const torch::Tensor& t) {
  if (trace != nullptr) trace->emplace_back(std::move(label), t.sizes().vec());
}

void expect_image(const torch::Tensor& x, int64_t channels, int64_t side, const char* who) {
  if (x.dim() != 4 || x.size(1) != channels || x.size(2) != side || x.size(3) != side) {
    throw ShapeError(std::string(who) + ": expected [N, " + std::to_string(channels) + ", " +
                     std::to_string(side) + ", " + std::to_string(side) + "], got " +
                     c10::str(x.sizes()));
  }
}

void expect_code(const torch::Tensor& x, int64_t dim, const char* who) {
  if (x.dim() != 2 || x.size(1) != dim) {
    throw ShapeError(std::string(who) + ": expected [N, " + std::to_string(dim) + "], got " +
                     c10::str(x.sizes()));
  }
}

void check_architecture(const HyperParams& hp) {
  if (hp.image_size < 32 || hp.image_size % 32 != 0) {
    throw ValidationError("image_size must be a positive multiple of 32");
  }
  if (!(hp.channel_scale > 0.0)) throw ValidationError("channel_scale must be positive");
}

using NamedModules = std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>>;

std::vector<torch::Tensor> collect(const NamedModules& modules) {
  std::vector<torch::Tensor> params;
  for (const auto& [name, m] : modules) {
    for (auto& p : m->parameters()) params.push_back(p);
  }
  return params;
}

} // namespace

// ---------------------------------------------------------------------------
// Look-up tables

EmbeddingsImpl::EmbeddingsImpl(const HyperParams& hp) : hp(hp) {
  auto lut = [](int64_t in, int64_t out) {
    return torch::nn::Linear(torch::nn::LinearOptions(in, out).bias(false));
  };
  v_bg = register_module("v_bg", lut(hp.n_parent, hp.d_bg));
  v_p = register_module("v_p", lut(hp.n_parent, hp.d_p));
  v_c = register_module("v_c", lut(hp.n_child, hp.d_c));
}

CodeBundle EmbeddingsImpl::forward(const torch::Tensor& e_bg, const torch::Tensor& e_p,
                                   const torch::Tensor& e_c) {
  expect_code(e_bg, hp.n_parent, "V_bg");
  expect_code(e_p, hp.n_parent, "V_p");
  expect_code(e_c, hp.n_child, "V_c");
  return {v_bg->forward(e_bg), v_p->forward(e_p), v_c->forward(e_c)};
}

// ---------------------------------------------------------------------------
// Generators

PreImageStageImpl::PreImageStageImpl(const HyperParams& hp, int64_t code_dim)
    : hp(hp), code_dim(code_dim) {
  check_architecture(hp);
  seed_channels = 2 * hp.width(1024);
  seed_side = hp.side(4);
  fc = register_module(
      "fc", torch::nn::Linear(code_dim + hp.d_z, seed_channels * seed_side * seed_side));
  glu = register_module("glu", GLUNorm(hp.width(1024)));
  up8 = register_module("up8", UpBlock(hp.width(1024), hp.width(512), hp.side(8)));
  up16 = register_module("up16", UpBlock(hp.width(512), hp.width(256), hp.side(16)));
}

torch::Tensor PreImageStageImpl::forward(const torch::Tensor& code, const torch::Tensor& z,
                                         ShapeTrace* trace) {
  expect_code(code, code_dim, "pre-image stage code");
  expect_code(z, hp.d_z, "pre-image stage z");
  if (code.size(0) != z.size(0)) throw ShapeError("code and z batch sizes differ");
  auto h = fc->forward(torch::cat({code, z}, 1));
  record(trace, "Linear", h);
  h = h.view({h.size(0), seed_channels, seed_side, seed_side});
  record(trace, "Reshape", h);
  h = glu->forward(h);
  record(trace, "GLUNorm", h);
  h = up8->forward(h);
  record(trace, "UPBlk(1024,512,8)", h);
  h = up16->forward(h);
  record(trace, "UPBlk(512,256,16)", h);
  return h;
}

BackgroundGeneratorImpl::BackgroundGeneratorImpl(const HyperParams& hp) : hp(hp) {
  stage0 = register_module("stage0", PreImageStage(hp, hp.d_bg));
  up32 = register_module("up32", UpBlock(hp.width(256), hp.width(128), hp.side(32)));
  up64 = register_module("up64", UpBlock(hp.width(128), hp.width(64), hp.side(64)));
  up128 = register_module("up128", UpBlock(hp.width(64), hp.width(32), hp.side(128)));
  to_rgb = register_module("to_rgb", conv2d(hp.width(32), 3, 3, 1, 1));
}

torch::Tensor BackgroundGeneratorImpl::pre_image(const torch::Tensor& v_bg, const torch::Tensor& z,
                                                 ShapeTrace* trace) {
  return stage0->forward(v_bg, z, trace);
}

torch::Tensor BackgroundGeneratorImpl::render(const torch::Tensor& pre, ShapeTrace* trace) {
  expect_image(pre, hp.width(256), hp.side(16), "G_bg1");
  auto h = up32->forward(pre);
  record(trace, "UPBlk(256,128,32)", h);
  h = up64->forward(h);
  record(trace, "UPBlk(128,64,64)", h);
  h = up128->forward(h);
  record(trace, "UPBlk(64,32,128)", h);
  h = torch::tanh(to_rgb->forward(h));
  record(trace, "K3P1Conv2d(32,3)+tanh", h);
  return h;
}

ForegroundGeneratorImpl::ForegroundGeneratorImpl(const HyperParams& hp) : hp(hp) {
  stage0 = register_module("stage0", PreImageStage(hp, hp.d_p));
  up32 = register_module("up32", UpBlock(hp.width(256), hp.width(128), hp.side(32)));
  up64 = register_module("up64", UpBlock(hp.width(128), hp.width(64), hp.side(64)));
  up128 = register_module("up128", UpBlock(hp.width(64), hp.width(64), hp.side(128)));
  shape_res = register_module("shape_res", ResBlock(hp.width(64), hp.d_p, hp.width(32)));
  style_res = register_module("style_res", ResBlock(hp.width(32), hp.d_c, hp.width(16)));
  to_rgb = register_module("to_rgb", conv2d(hp.width(16), 3, 3, 1, 1));
  to_mask = register_module("to_mask", conv2d(hp.width(16), 1, 3, 1, 1));
}

torch::Tensor ForegroundGeneratorImpl::pre_image(const torch::Tensor& v_p, const torch::Tensor& z,
                                                 ShapeTrace* trace) {
  return stage0->forward(v_p, z, trace);
}

std::pair<torch::Tensor, torch::Tensor> ForegroundGeneratorImpl::render(const torch::Tensor& pre,
                                                                        const torch::Tensor& v_p,
                                                                        const torch::Tensor& v_c,
                                                                        ShapeTrace* trace) {
  expect_image(pre, hp.width(256), hp.side(16), "G_fg1");
  expect_code(v_p, hp.d_p, "G_fg2 shape code");
  expect_code(v_c, hp.d_c, "G_fg2 style code");
  auto h = up32->forward(pre);
  record(trace, "UPBlk(256,128,32)", h);
  h = up64->forward(h);
  record(trace, "UPBlk(128,64,64)", h);
  h = up128->forward(h);
  record(trace, "UPBlk(64,64,128)", h);
  h = shape_res->forward(h, v_p);
  record(trace, "RESBlk(64,d_p,32)", h);
  h = style_res->forward(h, v_c);
  record(trace, "RESBlk(32,d_c,16)", h);
  auto image = torch::tanh(to_rgb->forward(h));
  record(trace, "K3P1Conv2d(16,3)+tanh", image);
  auto mask = torch::sigmoid(to_mask->forward(h));
  record(trace, "K3P1Conv2d(16,1)+sigmoid", mask);
  return {image, mask};
}

// ---------------------------------------------------------------------------
// Encoders

EncoderStemImpl::EncoderStemImpl(const HyperParams& hp, int64_t in_channels, bool normalize_first)
    : hp(hp), in_channels(in_channels), normalize_first(normalize_first) {
  check_architecture(hp);
  conv = register_module("conv", conv2d(in_channels, hp.width(64), 4, 2, 1));
  if (normalize_first) norm = register_module("norm", LayerNorm2d(hp.width(64)));
  down1 = register_module("down1", DownBlock(hp.width(64), hp.width(128)));
  down2 = register_module("down2", DownBlock(hp.width(128), hp.width(256)));
}

torch::Tensor EncoderStemImpl::forward(const torch::Tensor& x, ShapeTrace* trace) {
  expect_image(x, in_channels, hp.image_size, "encoder stem");
  auto h = conv->forward(x);
  record(trace, "K4S2P1Conv2d(" + std::to_string(in_channels) + ",64)", h);
  if (normalize_first) {
    h = lrelu(norm->forward(h));
    record(trace, "LayerNorm+lReLU", h);
  }
  h = down1->forward(h);
  record(trace, "DOWNBlk(64,128)", h);
  h = down2->forward(h);
  record(trace, "DOWNBlk(128,256)", h);
  return h;
}

EncoderTrunkImpl::EncoderTrunkImpl(const HyperParams& hp) : hp(hp) {
  down1 = register_module("down1", DownBlock(hp.width(256), hp.width(512)));
  down2 = register_module("down2", DownBlock(hp.width(512), hp.width(1024)));
  conv = register_module("conv", conv2d(hp.width(1024), hp.width(1024), 3, 1, 1));
  norm = register_module("norm", LayerNorm2d(hp.width(1024)));
}

int64_t EncoderTrunkImpl::flat_features() const {
  const int64_t side = hp.side(4);
  return hp.width(1024) * side * side;
}

torch::Tensor EncoderTrunkImpl::forward(const torch::Tensor& h, ShapeTrace* trace,
                                        torch::Tensor* mid) {
  auto x = down1->forward(h);
  record(trace, "DOWNBlk(256,512)", x);
  if (mid != nullptr) *mid = x;
  x = down2->forward(x);
  record(trace, "DOWNBlk(512,1024)", x);
  x = conv->forward(x);
  record(trace, "K3P1Conv2d(1024,1024)", x);
  x = lrelu(norm->forward(x));
  record(trace, "LayerNorm+lReLU", x);
  x = x.flatten(1);
  record(trace, "Reshape", x);
  return x;
}

DenseHiddenImpl::DenseHiddenImpl(int64_t in_features, int64_t out_features) {
  fc = register_module("fc", torch::nn::Linear(in_features, out_features));
  norm = register_module(
      "norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({out_features})));
}

torch::Tensor DenseHiddenImpl::forward(const torch::Tensor& x) {
  return lrelu(norm->forward(fc->forward(x)));
}

BypassHeadImpl::BypassHeadImpl(const HyperParams& hp) : hp(hp) {
  conv = register_module("conv", conv2d(hp.width(256), 2 * hp.width(256), 3, 1, 1));
  glu = register_module("glu", GLUNorm(hp.width(256)));
  refine = register_module(
      "refine", UpBlock(hp.width(256), hp.width(256), hp.side(16), /*upsample=*/false));
}

torch::Tensor BypassHeadImpl::forward(const torch::Tensor& h, ShapeTrace* trace) {
  auto x = conv->forward(h);
  record(trace, "K3P1Conv2d(256,512)", x);
  x = glu->forward(x);
  record(trace, "GLUNorm", x);
  x = refine->forward(x);
  record(trace, "UPBlk(256,256)", x);
  return x;
}

ContentEncoderImpl::ContentEncoderImpl(const HyperParams& hp) : hp(hp) {
  stem = register_module("stem", EncoderStem(hp, 3, true));
  bypass = register_module("bypass", BypassHead(hp));
  trunk = register_module("trunk", EncoderTrunk(hp));
  const int64_t flat = trunk->flat_features();
  const int64_t hidden = hp.width(512);
  hidden_p = register_module("hidden_p", DenseHidden(flat, hidden));
  logits_p = register_module("logits_p", torch::nn::Linear(hidden, hp.n_parent));
  mu_p = register_module("mu_p", torch::nn::Linear(hidden, hp.d_p));
  logsig_p = register_module("logsig_p", torch::nn::Linear(hidden, hp.d_p));
  hidden_z = register_module("hidden_z", DenseHidden(flat, hidden));
  mu_z = register_module("mu_z", torch::nn::Linear(hidden, hp.d_z));
  logsig_z = register_module("logsig_z", torch::nn::Linear(hidden, hp.d_z));
}

EncoderPosterior ContentEncoderImpl::forward(const torch::Tensor& image, ShapeTrace* trace) {
  auto h = stem->forward(image, trace);
  EncoderPosterior out;
  out.bypass_fg = bypass->forward(h, trace);
  auto flat = trunk->forward(h, trace);
  auto hp_feat = hidden_p->forward(flat);
  record(trace, "h_p", hp_feat);
  out.logits_p = logits_p->forward(hp_feat);
  out.mu_p = mu_p->forward(hp_feat);
  out.logsig_p = logsig_p->forward(hp_feat);
  auto hz_feat = hidden_z->forward(flat);
  record(trace, "h_z", hz_feat);
  out.mu_z = mu_z->forward(hz_feat);
  out.logsig_z = logsig_z->forward(hz_feat);
  return out;
}

StyleEncoderImpl::StyleEncoderImpl(const HyperParams& hp) : hp(hp) {
  stem = register_module("stem", EncoderStem(hp, 3, true));
  trunk = register_module("trunk", EncoderTrunk(hp));
  const int64_t hidden_width = hp.width(512);
  hidden = register_module("hidden", DenseHidden(trunk->flat_features(), hidden_width));
  logits_c = register_module("logits_c", torch::nn::Linear(hidden_width, hp.n_child));
  mu_c = register_module("mu_c", torch::nn::Linear(hidden_width, hp.d_c));
  logsig_c = register_module("logsig_c", torch::nn::Linear(hidden_width, hp.d_c));
}

EncoderPosterior StyleEncoderImpl::forward(const torch::Tensor& image, ShapeTrace* trace) {
  auto h = hidden->forward(trunk->forward(stem->forward(image, trace), trace));
  record(trace, "h_c", h);
  EncoderPosterior out;
  out.logits_c = logits_c->forward(h);
  out.mu_c = mu_c->forward(h);
  out.logsig_c = logsig_c->forward(h);
  return out;
}

BackgroundEncoderImpl::BackgroundEncoderImpl(const HyperParams& hp) : hp(hp) {
  // The table lists no normalization after the first convolution here.
  stem = register_module("stem", EncoderStem(hp, 4, false));
  bypass = register_module("bypass", BypassHead(hp));
}

torch::Tensor BackgroundEncoderImpl::forward(const torch::Tensor& image, const torch::Tensor& mask,
                                             ShapeTrace* trace) {
  expect_image(image, 3, hp.image_size, "E_bg image");
  expect_image(mask, 1, hp.image_size, "E_bg mask");
  return bypass->forward(stem->forward(torch::cat({image, mask}, 1), trace), trace);
}

// ---------------------------------------------------------------------------
// Discriminators

BackgroundDiscriminatorImpl::BackgroundDiscriminatorImpl(const HyperParams& hp) : hp(hp) {
  check_architecture(hp);
  conv1 = register_module("conv1", conv2d(3, hp.width(64), 4, 2, 0));
  conv2 = register_module("conv2", conv2d(hp.width(64), hp.width(128), 4, 2, 0));
  conv3 = register_module("conv3", conv2d(hp.width(128), hp.width(256), 4, 4, 0));
  head_rf = register_module("head_rf", conv2d(hp.width(256), 1, 4, 1, 0));
  head_bg = register_module("head_bg", conv2d(hp.width(256), 1, 4, 1, 0));
}

BackgroundDiscrimination BackgroundDiscriminatorImpl::forward(const torch::Tensor& image,
                                                              ShapeTrace* trace) {
  expect_image(image, 3, hp.image_size, "D_bg");
  auto x = F::interpolate(image, F::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{126, 126})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
  record(trace, "DownSample2d(128,126)", x);
  x = lrelu(conv1->forward(x));
  record(trace, "K4S2P0Conv2d(3,64)", x);
  x = lrelu(conv2->forward(x));
  record(trace, "K4S2P0Conv2d(64,128)", x);
  x = lrelu(conv3->forward(x));
  record(trace, "K4S4P0Conv2d(128,256)", x);
  BackgroundDiscrimination out;
  out.features = x;
  out.real_fake = head_rf->forward(x);
  record(trace, "D_bg_A", out.real_fake);
  out.background = head_bg->forward(x);
  record(trace, "D_bg_B", out.background);
  return out;
}

torch::Tensor BackgroundDiscriminatorImpl::features(const torch::Tensor& image) {
  return forward(image).features;
}

ImageDiscriminatorImpl::ImageDiscriminatorImpl(const HyperParams& hp) : hp(hp) {
  stem = register_module("stem", EncoderStem(hp, 3, true));
  trunk = register_module("trunk", EncoderTrunk(hp));
  const int64_t flat = trunk->flat_features();
  const int64_t hidden = hp.width(512);
  hidden_rf = register_module("hidden_rf", DenseHidden(flat, hidden));
  real_fake = register_module("real_fake", torch::nn::Linear(hidden, 1));
  hidden_cls = register_module("hidden_cls", DenseHidden(flat, hidden));
  class_logits = register_module("class_logits", torch::nn::Linear(hidden, hp.n_child));
}

ImageDiscrimination ImageDiscriminatorImpl::forward(const torch::Tensor& image, ShapeTrace* trace) {
  ImageDiscrimination out;
  auto flat = trunk->forward(stem->forward(image, trace), trace, &out.features);
  out.real_fake = real_fake->forward(hidden_rf->forward(flat));
  record(trace, "D_c_A", out.real_fake);
  out.class_logits = class_logits->forward(hidden_cls->forward(flat));
  record(trace, "D_c_B", out.class_logits);
  return out;
}

torch::Tensor ImageDiscriminatorImpl::features(const torch::Tensor& image) {
  auto h = stem->forward(image);
  return trunk->down1->forward(h);
}

// ---------------------------------------------------------------------------

GeneratorSet::GeneratorSet(const HyperParams& hp)
    : hp(hp),
      lut(hp),
      g_bg(hp),
      g_fg(hp),
      e_p(hp),
      e_c(hp),
      e_bg(hp) {}

NamedModules GeneratorSet::generator_modules() const {
  return {{"lut", lut.ptr()}, {"g_bg", g_bg.ptr()}, {"g_fg", g_fg.ptr()}};
}

NamedModules GeneratorSet::encoder_modules() const {
  return {{"e_p", e_p.ptr()}, {"e_c", e_c.ptr()}, {"e_bg", e_bg.ptr()}};
}

std::vector<torch::Tensor> GeneratorSet::generator_parameters() const {
  return collect(generator_modules());
}

std::vector<torch::Tensor> GeneratorSet::encoder_parameters() const {
  return collect(encoder_modules());
}

void GeneratorSet::to(torch::Dtype dtype) {
  for (auto& [name, m] : generator_modules()) m->to(dtype);
  for (auto& [name, m] : encoder_modules()) m->to(dtype);
}

void GeneratorSet::train(bool on) {
  for (auto& [name, m] : generator_modules()) m->train(on);
  for (auto& [name, m] : encoder_modules()) m->train(on);
}

int64_t parameter_count(const torch::nn::Module& module) {
  int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

} // namespace onegan
