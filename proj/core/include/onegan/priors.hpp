// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include <torch/torch.h>

#include "onegan/config.hpp"

namespace onegan {

/// Generation inputs for a batch. Class indices are stored 0-based in the
/// tensors; the scalar API (onehot, CLI flags) is 1-based.
struct PriorBundle {
  torch::Tensor child;   // [N] int64, 0-based
  torch::Tensor parent;  // [N] int64, 0-based
  torch::Tensor e_c;     // [N, n_child]
  torch::Tensor e_p;     // [N, n_parent]
  torch::Tensor e_bg;    // [N, n_parent], equal to e_p
  torch::Tensor z;       // [N, d_z]

  int64_t size() const { return child.size(0); }
};

/// One-hot vector of length `size` with a 1 at the 1-based `index`.
torch::Tensor onehot(int64_t index, int64_t size);

/// Batched one-hot rows from 0-based class tensors.
torch::Tensor onehot_rows(const torch::Tensor& classes, int64_t size);

/// Fixed hierarchy: child classes are grouped into contiguous blocks, one
/// block per parent. Both indices 0-based.
int64_t parent_of(int64_t child, const HyperParams& hp);
torch::Tensor parent_of(const torch::Tensor& child, const HyperParams& hp);

/// Builds a bundle from explicit classes and pose codes.
PriorBundle make_priors(const HyperParams& hp, torch::Tensor child, torch::Tensor parent,
                        torch::Tensor z);

/// Child classes uniform on [0, n_child); parents follow the hierarchy unless
/// `independent_parent`, in which case they are uniform too. z ~ N(0, I).
PriorBundle sample_priors(const HyperParams& hp, int64_t batch, torch::Generator& gen,
                          bool independent_parent = false);

torch::Generator make_generator(uint64_t seed);

} // namespace onegan
