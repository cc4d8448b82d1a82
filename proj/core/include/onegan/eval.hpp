// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "onegan/config.hpp"
#include "onegan/networks.hpp"

namespace onegan {

struct MetricReport {
  std::string metric;
  double value = 0;
  int64_t count = 0;
  std::string config_digest;
  int64_t iteration = -1;

  /// `metric=<name> value=<v> count=<n> config=<digest> iter=<i>`.
  std::string to_line() const;
};

/// Appends one line per report.
void append_results(const std::vector<MetricReport>& reports, const std::filesystem::path& file);

/// exp(mean_k KL(p_k || mean_j p_j)) over the rows of [K, C]. Rows must be
/// probability vectors (tolerance 1e-6).
double conditional_is(const torch::Tensor& class_avg_preds);

/// Arithmetic-mean normalized mutual information. Degenerate inputs (either
/// labeling with a single cluster) yield 0.
double nmi(const std::vector<int64_t>& a, const std::vector<int64_t>& b);
/// Adjusted mutual information, expected MI under the permutation model,
/// arithmetic-mean normalization.
double ami(const std::vector<int64_t>& a, const std::vector<int64_t>& b);
double mutual_information(const std::vector<int64_t>& a, const std::vector<int64_t>& b);
double entropy(const std::vector<int64_t>& labels);

/// Soft masks binarized with value >= threshold as foreground. Both empty -> 1.
double iou(const torch::Tensor& a, const torch::Tensor& b, double threshold = 0.5);
double dice(const torch::Tensor& a, const torch::Tensor& b, double threshold = 0.5);

/// k-means++ with `attempts` restarts, best compactness kept; rows of
/// `features` [N, D]. Deterministic given `seed`.
std::vector<int64_t> kmeans(const torch::Tensor& features, int64_t k, uint64_t seed,
                            int attempts = 10);

/// Encoder features [mu_p, mu_c] of float images in [-1, 1], evaluated in
/// batches without gradient.
torch::Tensor encode_codes(const torch::Tensor& images, GeneratorSet& nets, int64_t batch = 50);

std::vector<int64_t> cluster_codes(const torch::Tensor& images, GeneratorSet& nets, int64_t k,
                                   uint64_t seed, int attempts = 10);

struct SegmentationScores {
  double iou = 0;   // mean, x100
  double dice = 0;  // mean, x100
  int64_t count = 0;
};

/// Masks from the autoencoding path (steps up to the foreground render)
/// against ground truth masks uint8/float [N, 1, H, W].
SegmentationScores segmentation_eval(GeneratorSet& nets, const torch::Tensor& images,
                                     const torch::Tensor& masks, const MixupConfig& mixup,
                                     uint64_t seed, int64_t batch = 50);

/// Predicted masks of float images in [-1, 1], [N, 1, H, W] in [0, 1].
torch::Tensor predict_masks(GeneratorSet& nets, const torch::Tensor& images,
                            const MixupConfig& mixup, uint64_t seed, int64_t batch = 50);

// ---------------------------------------------------------------------------
// Oracle classifier standing in for a pretrained recognition network.

struct OracleNetImpl : torch::nn::Module {
  explicit OracleNetImpl(int64_t n_classes);
  torch::Tensor forward(const torch::Tensor& x);

  int64_t n_classes;
  torch::nn::Conv2d c1{nullptr}, c2{nullptr}, c3{nullptr};
  torch::nn::Linear fc{nullptr};
};
TORCH_MODULE(OracleNet);

struct OracleOptions {
  int64_t epochs = 6;
  int64_t batch = 32;
  double lr = 2e-3;
  double holdout = 0.2;
  double certify_floor = 0.95;
  uint64_t seed = 0;
};

struct OracleClassifier {
  OracleNet net{nullptr};
  double holdout_accuracy = 0;
  bool certified = false;

  /// Softmax probabilities of float images in [-1, 1].
  torch::Tensor predict(const torch::Tensor& images, int64_t batch = 100) const;
};

/// Trains on uint8 [N, 3, H, W] images with 0-based labels; the last
/// `holdout` fraction (after a seeded shuffle) measures accuracy.
OracleClassifier train_oracle_classifier(const torch::Tensor& images, const torch::Tensor& labels,
                                         int64_t n_classes, const OracleOptions& options = {});

/// Generates `per_class` images for every child class, averages the oracle's
/// predictions per class and returns conditional_is over those rows. Throws
/// StateError when the oracle is not certified.
double conditional_is_protocol(GeneratorSet& nets, const OracleClassifier& oracle,
                               int64_t per_class, uint64_t seed);

} // namespace onegan
