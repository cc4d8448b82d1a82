// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace onegan {

/// Layer normalization over (C, H, W) of each instance, with a learned
/// per-channel scale and shift.
struct LayerNorm2dImpl : torch::nn::Module {
  explicit LayerNorm2dImpl(int64_t channels, double eps = 1e-5);
  torch::Tensor forward(const torch::Tensor& x);

  int64_t channels;
  double eps;
  torch::Tensor weight;
  torch::Tensor bias;
};
TORCH_MODULE(LayerNorm2d);

/// Gated linear unit with layer normalization applied to the gated half only:
/// out = sigmoid(x_R) * LayerNorm(x_L), where x_L is the first half of the
/// channels. Input 2c channels, output c.
struct GLUNormImpl : torch::nn::Module {
  explicit GLUNormImpl(int64_t out_channels);
  torch::Tensor forward(const torch::Tensor& x);

  int64_t out_channels;
  LayerNorm2d norm{nullptr};
};
TORCH_MODULE(GLUNorm);

/// UPBlk(c_i, c_o, S): nearest upsample S/2 -> S, 3x3 conv to 2c_o, GLUNorm.
/// With `upsample == false` the block refines at constant resolution.
/// `out_side == 0` disables the spatial check.
struct UpBlockImpl : torch::nn::Module {
  UpBlockImpl(int64_t c_in, int64_t c_out, int64_t out_side, bool upsample = true);
  torch::Tensor forward(const torch::Tensor& x);

  int64_t c_in, c_out, out_side;
  bool upsample;
  torch::nn::Conv2d conv{nullptr};
  GLUNorm glu{nullptr};
};
TORCH_MODULE(UpBlock);

/// DOWNBlk(c_i, c_o): 4x4 stride-2 pad-1 conv, LayerNorm, leaky ReLU(0.2).
struct DownBlockImpl : torch::nn::Module {
  DownBlockImpl(int64_t c_in, int64_t c_out);
  torch::Tensor forward(const torch::Tensor& x);

  int64_t c_in, c_out;
  torch::nn::Conv2d conv{nullptr};
  LayerNorm2d norm{nullptr};
};
TORCH_MODULE(DownBlock);

/// RESBlk0(c): two (conv 3x3 -> GLUNorm) stages added back onto the input.
struct ResBlock0Impl : torch::nn::Module {
  explicit ResBlock0Impl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

  int64_t channels;
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  GLUNorm glu1{nullptr}, glu2{nullptr};
};
TORCH_MODULE(ResBlock0);

/// RESBlk(c_i, d, c_o): conditioning vector broadcast and concatenated on
/// channels, entry conv+GLUNorm, two RESBlk0 cores, exit conv+GLUNorm to c_o.
struct ResBlockImpl : torch::nn::Module {
  ResBlockImpl(int64_t c_in, int64_t cond_dim, int64_t c_out);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& cond);

  int64_t c_in, cond_dim, c_out;
  torch::nn::Conv2d entry{nullptr}, exit{nullptr};
  GLUNorm entry_glu{nullptr}, exit_glu{nullptr};
  ResBlock0 core1{nullptr}, core2{nullptr};
};
TORCH_MODULE(ResBlock);

torch::Tensor lrelu(const torch::Tensor& x);

/// Shorthand for the KxSyPzConv2d table entries.
torch::nn::Conv2d conv2d(int64_t c_in, int64_t c_out, int64_t kernel, int64_t stride,
                         int64_t padding);

} // namespace onegan
