// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "onegan/blocks.hpp"
#include "onegan/config.hpp"

namespace onegan {

/// Optional per-layer shape log: (layer label, output shape).
using ShapeTrace = std::vector<std::pair<std::string, std::vector<int64_t>>>;

/// Dense class codes, batch-major.
struct CodeBundle {
  torch::Tensor v_bg;  // [N, d_bg]
  torch::Tensor v_p;   // [N, d_p]
  torch::Tensor v_c;   // [N, d_c]
};

/// Encoder outputs. Class predictions are raw logits; deviations are logs.
struct EncoderPosterior {
  torch::Tensor logits_p, logits_c;
  torch::Tensor mu_p, logsig_p;
  torch::Tensor mu_c, logsig_c;
  torch::Tensor mu_z, logsig_z;
  torch::Tensor bypass_fg;
  torch::Tensor bypass_bg;
};

/// V_bg, V_p, V_c look-up tables: bias-free linear maps of one-hot vectors.
struct EmbeddingsImpl : torch::nn::Module {
  explicit EmbeddingsImpl(const HyperParams& hp);
  CodeBundle forward(const torch::Tensor& e_bg, const torch::Tensor& e_p,
                     const torch::Tensor& e_c);

  HyperParams hp;
  torch::nn::Linear v_bg{nullptr}, v_p{nullptr}, v_c{nullptr};
};
TORCH_MODULE(Embeddings);

/// Linear -> reshape -> GLUNorm -> UPBlk x2; shared shape of G_bg0 and G_fg0.
struct PreImageStageImpl : torch::nn::Module {
  PreImageStageImpl(const HyperParams& hp, int64_t code_dim);
  torch::Tensor forward(const torch::Tensor& code, const torch::Tensor& z,
                        ShapeTrace* trace = nullptr);

  HyperParams hp;
  int64_t code_dim;
  int64_t seed_channels;  // channels entering the first GLUNorm
  int64_t seed_side;
  torch::nn::Linear fc{nullptr};
  GLUNorm glu{nullptr};
  UpBlock up8{nullptr}, up16{nullptr};
};
TORCH_MODULE(PreImageStage);

/// G_bg = (G_bg0, G_bg1).
struct BackgroundGeneratorImpl : torch::nn::Module {
  explicit BackgroundGeneratorImpl(const HyperParams& hp);
  /// G_bg0(v_bg, z) -> A_bg.
  torch::Tensor pre_image(const torch::Tensor& v_bg, const torch::Tensor& z,
                          ShapeTrace* trace = nullptr);
  /// G_bg1(A_bg or B_bg) -> I_bg in [-1, 1].
  torch::Tensor render(const torch::Tensor& pre, ShapeTrace* trace = nullptr);

  HyperParams hp;
  PreImageStage stage0{nullptr};
  UpBlock up32{nullptr}, up64{nullptr}, up128{nullptr};
  torch::nn::Conv2d to_rgb{nullptr};
};
TORCH_MODULE(BackgroundGenerator);

/// G_fg = (G_fg0, G_fg1, G_fg2).
struct ForegroundGeneratorImpl : torch::nn::Module {
  explicit ForegroundGeneratorImpl(const HyperParams& hp);
  /// G_fg0(v_p, z) -> A_fg.
  torch::Tensor pre_image(const torch::Tensor& v_p, const torch::Tensor& z,
                          ShapeTrace* trace = nullptr);
  /// G_fg1 then G_fg2: (A_fg, v_p, v_c) -> (I_fg in [-1,1], I_m in [0,1]).
  std::pair<torch::Tensor, torch::Tensor> render(const torch::Tensor& pre,
                                                 const torch::Tensor& v_p,
                                                 const torch::Tensor& v_c,
                                                 ShapeTrace* trace = nullptr);

  HyperParams hp;
  PreImageStage stage0{nullptr};
  UpBlock up32{nullptr}, up64{nullptr}, up128{nullptr};
  ResBlock shape_res{nullptr}, style_res{nullptr};
  torch::nn::Conv2d to_rgb{nullptr}, to_mask{nullptr};
};
TORCH_MODULE(ForegroundGenerator);

/// Strided stem shared by E_p and E_c: conv(3, 64) + LN + lReLU, DOWNBlk x2.
struct EncoderStemImpl : torch::nn::Module {
  EncoderStemImpl(const HyperParams& hp, int64_t in_channels, bool normalize_first);
  torch::Tensor forward(const torch::Tensor& x, ShapeTrace* trace = nullptr);

  HyperParams hp;
  int64_t in_channels;
  bool normalize_first;
  torch::nn::Conv2d conv{nullptr};
  LayerNorm2d norm{nullptr};
  DownBlock down1{nullptr}, down2{nullptr};
};
TORCH_MODULE(EncoderStem);

/// DOWNBlk(256,512), DOWNBlk(512,1024), conv 3x3, LN, lReLU, flatten.
/// `mid`, when given, receives the DOWNBlk(256,512) activation.
struct EncoderTrunkImpl : torch::nn::Module {
  explicit EncoderTrunkImpl(const HyperParams& hp);
  torch::Tensor forward(const torch::Tensor& h, ShapeTrace* trace = nullptr,
                        torch::Tensor* mid = nullptr);
  int64_t flat_features() const;

  HyperParams hp;
  DownBlock down1{nullptr}, down2{nullptr};
  torch::nn::Conv2d conv{nullptr};
  LayerNorm2d norm{nullptr};
};
TORCH_MODULE(EncoderTrunk);

/// Linear -> LayerNorm -> lReLU hidden layer used before every linear head.
struct DenseHiddenImpl : torch::nn::Module {
  DenseHiddenImpl(int64_t in_features, int64_t out_features);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear fc{nullptr};
  torch::nn::LayerNorm norm{nullptr};
};
TORCH_MODULE(DenseHidden);

/// conv 3x3 to 2c -> GLUNorm -> resolution-preserving UPBlk; emits a bypass
/// shaped like the generator pre-image.
struct BypassHeadImpl : torch::nn::Module {
  explicit BypassHeadImpl(const HyperParams& hp);
  torch::Tensor forward(const torch::Tensor& h, ShapeTrace* trace = nullptr);

  HyperParams hp;
  torch::nn::Conv2d conv{nullptr};
  GLUNorm glu{nullptr};
  UpBlock refine{nullptr};
};
TORCH_MODULE(BypassHead);

/// E_p: parent logits, shape code posterior, pose posterior, B_fg.
struct ContentEncoderImpl : torch::nn::Module {
  explicit ContentEncoderImpl(const HyperParams& hp);
  EncoderPosterior forward(const torch::Tensor& image, ShapeTrace* trace = nullptr);

  HyperParams hp;
  EncoderStem stem{nullptr};
  BypassHead bypass{nullptr};
  EncoderTrunk trunk{nullptr};
  DenseHidden hidden_p{nullptr}, hidden_z{nullptr};
  torch::nn::Linear logits_p{nullptr}, mu_p{nullptr}, logsig_p{nullptr};
  torch::nn::Linear mu_z{nullptr}, logsig_z{nullptr};
};
TORCH_MODULE(ContentEncoder);

/// E_c: child logits and style code posterior.
struct StyleEncoderImpl : torch::nn::Module {
  explicit StyleEncoderImpl(const HyperParams& hp);
  EncoderPosterior forward(const torch::Tensor& image, ShapeTrace* trace = nullptr);

  HyperParams hp;
  EncoderStem stem{nullptr};
  EncoderTrunk trunk{nullptr};
  DenseHidden hidden{nullptr};
  torch::nn::Linear logits_c{nullptr}, mu_c{nullptr}, logsig_c{nullptr};
};
TORCH_MODULE(StyleEncoder);

/// E_bg: (image, mask) -> B_bg.
struct BackgroundEncoderImpl : torch::nn::Module {
  explicit BackgroundEncoderImpl(const HyperParams& hp);
  torch::Tensor forward(const torch::Tensor& image, const torch::Tensor& mask,
                        ShapeTrace* trace = nullptr);

  HyperParams hp;
  EncoderStem stem{nullptr};
  BypassHead bypass{nullptr};
};
TORCH_MODULE(BackgroundEncoder);

struct BackgroundDiscrimination {
  torch::Tensor real_fake;   // [N, 1, 4, 4] patch logits (D_bg_A)
  torch::Tensor background;  // [N, 1, 4, 4] patch logits (D_bg_B)
  torch::Tensor features;    // D_bg_C
};

/// D_bg: resample to 126 px, three strided convs, two 4x4 patch heads.
struct BackgroundDiscriminatorImpl : torch::nn::Module {
  explicit BackgroundDiscriminatorImpl(const HyperParams& hp);
  BackgroundDiscrimination forward(const torch::Tensor& image, ShapeTrace* trace = nullptr);
  torch::Tensor features(const torch::Tensor& image);

  HyperParams hp;
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
  torch::nn::Conv2d head_rf{nullptr}, head_bg{nullptr};
};
TORCH_MODULE(BackgroundDiscriminator);

struct ImageDiscrimination {
  torch::Tensor real_fake;     // [N, 1] (D_c_A)
  torch::Tensor class_logits;  // [N, n_child] (D_c_B)
  torch::Tensor features;      // D_c_C, output of DOWNBlk(256, 512)
};

/// D_c: real/fake logit, child-class logits, hidden features.
struct ImageDiscriminatorImpl : torch::nn::Module {
  explicit ImageDiscriminatorImpl(const HyperParams& hp);
  ImageDiscrimination forward(const torch::Tensor& image, ShapeTrace* trace = nullptr);
  torch::Tensor features(const torch::Tensor& image);

  HyperParams hp;
  EncoderStem stem{nullptr};
  EncoderTrunk trunk{nullptr};
  DenseHidden hidden_rf{nullptr}, hidden_cls{nullptr};
  torch::nn::Linear real_fake{nullptr}, class_logits{nullptr};
};
TORCH_MODULE(ImageDiscriminator);

/// Generators, look-up tables, and encoders; the parameters optimized on
/// L_GEN / L_AE.
struct GeneratorSet {
  explicit GeneratorSet(const HyperParams& hp);

  HyperParams hp;
  Embeddings lut{nullptr};
  BackgroundGenerator g_bg{nullptr};
  ForegroundGenerator g_fg{nullptr};
  ContentEncoder e_p{nullptr};
  StyleEncoder e_c{nullptr};
  BackgroundEncoder e_bg{nullptr};

  /// (name, module) pairs in a fixed order; names prefix checkpoint entries.
  std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> generator_modules() const;
  std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> encoder_modules() const;
  std::vector<torch::Tensor> generator_parameters() const;
  std::vector<torch::Tensor> encoder_parameters() const;
  void to(torch::Dtype dtype);
  void train(bool on = true);
};

/// Table element counts used by tests and the parameter summary.
int64_t parameter_count(const torch::nn::Module& module);

} // namespace onegan
