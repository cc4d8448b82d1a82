// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#include "onegan/priors.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include "onegan/errors.hpp"

namespace onegan {

torch::Tensor onehot(int64_t index, int64_t size) {
  if (size < 1 || index < 1 || index > size) {
    throw ValidationError("onehot index " + std::to_string(index) + " outside [1, " +
                          std::to_string(size) + "]");
  }
  auto v = torch::zeros({size});
  v[index - 1] = 1.0;
  return v;
}

torch::Tensor onehot_rows(const torch::Tensor& classes, int64_t size) {
  if (classes.numel() > 0) {
    if (classes.min().item<int64_t>() < 0 || classes.max().item<int64_t>() >= size) {
      throw ValidationError("class index outside one-hot width");
    }
  }
  return torch::one_hot(classes.to(torch::kLong), size).to(torch::kFloat);
}

int64_t parent_of(int64_t child, const HyperParams& hp) {
  if (child < 0 || child >= hp.n_child) throw ValidationError("child index out of range");
  return child * hp.n_parent / hp.n_child;
}

torch::Tensor parent_of(const torch::Tensor& child, const HyperParams& hp) {
  return torch::div(child.to(torch::kLong) * hp.n_parent, hp.n_child, "floor");
}

PriorBundle make_priors(const HyperParams& hp, torch::Tensor child, torch::Tensor parent,
                        torch::Tensor z) {
  if (child.dim() != 1 || parent.sizes() != child.sizes()) {
    throw ShapeError("child/parent must be equal-length 1-D tensors");
  }
  if (z.dim() != 2 || z.size(0) != child.size(0) || z.size(1) != hp.d_z) {
    throw ShapeError("z must be [N, d_z]");
  }
  PriorBundle p;
  p.child = child.to(torch::kLong);
  p.parent = parent.to(torch::kLong);
  p.e_c = onehot_rows(p.child, hp.n_child);
  p.e_p = onehot_rows(p.parent, hp.n_parent);
  p.e_bg = p.e_p.clone();
  p.z = std::move(z);
  return p;
}

PriorBundle sample_priors(const HyperParams& hp, int64_t batch, torch::Generator& gen,
                          bool independent_parent) {
  auto child = torch::randint(hp.n_child, {batch}, gen, torch::kLong);
  auto parent = independent_parent ? torch::randint(hp.n_parent, {batch}, gen, torch::kLong)
                                   : parent_of(child, hp);
  auto z = torch::randn({batch, hp.d_z}, gen);
  return make_priors(hp, child, parent, z);
}

torch::Generator make_generator(uint64_t seed) {
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

} // namespace onegan
