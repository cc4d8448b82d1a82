// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "onegan/blocks.hpp"

#include <string>

#include "onegan/errors.hpp"

namespace F = torch::nn::functional;

namespace onegan {

namespace {

void expect_channels(const torch::Tensor& x, int64_t channels, const char* block) {
  if (x.dim() != 4 || x.size(1) != channels) {
    throw ShapeError(std::string(block) + ": expected " + std::to_string(channels) +
                     " input channels, got shape " + c10::str(x.sizes()));
  }
}

} // namespace

torch::Tensor lrelu(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2));
}

torch::nn::Conv2d conv2d(int64_t c_in, int64_t c_out, int64_t kernel, int64_t stride,
                         int64_t padding) {
  return torch::nn::Conv2d(
      torch::nn::Conv2dOptions(c_in, c_out, kernel).stride(stride).padding(padding));
}

LayerNorm2dImpl::LayerNorm2dImpl(int64_t channels, double eps) : channels(channels), eps(eps) {
  weight = register_parameter("weight", torch::ones({channels}));
  bias = register_parameter("bias", torch::zeros({channels}));
}

torch::Tensor LayerNorm2dImpl::forward(const torch::Tensor& x) {
  expect_channels(x, channels, "LayerNorm2d");
  auto y = torch::layer_norm(x, {x.size(1), x.size(2), x.size(3)}, {}, {}, eps);
  return y * weight.view({1, -1, 1, 1}) + bias.view({1, -1, 1, 1});
}

GLUNormImpl::GLUNormImpl(int64_t out_channels) : out_channels(out_channels) {
  norm = register_module("norm", LayerNorm2d(out_channels));
}

torch::Tensor GLUNormImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) % 2 != 0) {
    throw ShapeError("GLUNorm: channel count must be even, got shape " + c10::str(x.sizes()));
  }
  expect_channels(x, 2 * out_channels, "GLUNorm");
  auto halves = x.chunk(2, 1);
  return torch::sigmoid(halves[1]) * norm->forward(halves[0]);
}

UpBlockImpl::UpBlockImpl(int64_t c_in, int64_t c_out, int64_t out_side, bool upsample)
    : c_in(c_in), c_out(c_out), out_side(out_side), upsample(upsample) {
  conv = register_module("conv", conv2d(c_in, 2 * c_out, 3, 1, 1));
  glu = register_module("glu", GLUNorm(c_out));
}

torch::Tensor UpBlockImpl::forward(const torch::Tensor& x) {
  expect_channels(x, c_in, "UPBlk");
  if (out_side > 0) {
    const int64_t expected = upsample ? out_side / 2 : out_side;
    if (x.size(2) != expected || x.size(3) != expected) {
      throw ShapeError("UPBlk: expected spatial side " + std::to_string(expected) + ", got " +
                       c10::str(x.sizes()));
    }
  }
  auto h = upsample ? F::interpolate(x, F::InterpolateFuncOptions()
                                            .scale_factor(std::vector<double>{2.0, 2.0})
                                            .mode(torch::kNearest))
                    : x;
  return glu->forward(conv->forward(h));
}

DownBlockImpl::DownBlockImpl(int64_t c_in, int64_t c_out) : c_in(c_in), c_out(c_out) {
  conv = register_module("conv", conv2d(c_in, c_out, 4, 2, 1));
  norm = register_module("norm", LayerNorm2d(c_out));
}

torch::Tensor DownBlockImpl::forward(const torch::Tensor& x) {
  expect_channels(x, c_in, "DOWNBlk");
  if (x.size(2) % 2 != 0 || x.size(3) % 2 != 0) {
    throw ShapeError("DOWNBlk: spatial sides must be even, got " + c10::str(x.sizes()));
  }
  return lrelu(norm->forward(conv->forward(x)));
}

ResBlock0Impl::ResBlock0Impl(int64_t channels) : channels(channels) {
  conv1 = register_module("conv1", conv2d(channels, 2 * channels, 3, 1, 1));
  glu1 = register_module("glu1", GLUNorm(channels));
  conv2 = register_module("conv2", conv2d(channels, 2 * channels, 3, 1, 1));
  glu2 = register_module("glu2", GLUNorm(channels));
}

torch::Tensor ResBlock0Impl::forward(const torch::Tensor& x) {
  expect_channels(x, channels, "RESBlk0");
  auto branch = glu2->forward(conv2->forward(glu1->forward(conv1->forward(x))));
  return x + branch;
}

ResBlockImpl::ResBlockImpl(int64_t c_in, int64_t cond_dim, int64_t c_out)
    : c_in(c_in), cond_dim(cond_dim), c_out(c_out) {
  entry = register_module("entry", conv2d(c_in + cond_dim, 2 * c_in, 3, 1, 1));
  entry_glu = register_module("entry_glu", GLUNorm(c_in));
  core1 = register_module("core1", ResBlock0(c_in));
  core2 = register_module("core2", ResBlock0(c_in));
  exit = register_module("exit", conv2d(c_in, 2 * c_out, 3, 1, 1));
  exit_glu = register_module("exit_glu", GLUNorm(c_out));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x, const torch::Tensor& cond) {
  expect_channels(x, c_in, "RESBlk");
  if (cond.dim() != 2 || cond.size(0) != x.size(0) || cond.size(1) != cond_dim) {
    throw ShapeError("RESBlk: conditioning must be [N, " + std::to_string(cond_dim) + "], got " +
                     c10::str(cond.sizes()));
  }
  auto tiled = cond.view({cond.size(0), cond_dim, 1, 1}).expand({-1, -1, x.size(2), x.size(3)});
  auto h = entry_glu->forward(entry->forward(torch::cat({x, tiled}, 1)));
  h = core2->forward(core1->forward(h));
  return exit_glu->forward(exit->forward(h));
}

} // namespace onegan
