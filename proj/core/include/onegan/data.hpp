// Copyright 2026 The onegan Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

namespace onegan {

// ---------------------------------------------------------------------------
// Image I/O. Stored images are uint8 [3, H, W] RGB; model tensors are float
// in [-1, 1].

/// Decodes an image file; center-crops to a square and resizes to `side`.
torch::Tensor read_image(const std::filesystem::path& path, int64_t side);
/// Decodes a single-channel mask (nonzero = foreground), resized with nearest
/// neighbour to `side`; returns uint8 [1, side, side] with values {0, 1}.
torch::Tensor read_mask(const std::filesystem::path& path, int64_t side);

/// Writes uint8 [3, H, W], uint8 [1, H, W] (0/1 or 0..255), or float images
/// in [-1, 1] ([3, H, W]) / [0, 1] ([1, H, W]) as PNG.
void write_png(const torch::Tensor& image, const std::filesystem::path& path);

/// uint8 [..., H, W] -> float in [-1, 1].
torch::Tensor to_model_range(const torch::Tensor& images);
/// float in [-1, 1] -> uint8.
torch::Tensor to_uint8(const torch::Tensor& images);

/// Tiles rows of image batches into one grid. Every row is [N, C, H, W] with
/// the same N, H, W; single-channel rows are treated as masks in [0, 1] and
/// three-channel rows as images in [-1, 1].
torch::Tensor make_grid(const std::vector<torch::Tensor>& rows, int64_t padding = 2);

// ---------------------------------------------------------------------------
// Manifest. One tab-separated record per line:
//   relpath  split  phi_p  phi_c  maskpath
// split is one of object, background, eval, oracle; class indices are 1-based; absent
// optional fields are written as '-'.

struct ManifestRecord {
  std::string path;
  std::string split;
  std::optional<int64_t> phi_p;
  std::optional<int64_t> phi_c;
  std::optional<std::string> mask;
};

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& file);
void write_manifest(const std::vector<ManifestRecord>& records, const std::filesystem::path& file);

/// Images decoded into memory. Labels and masks exist only for eval records
/// and never enter a training batch.
struct Dataset {
  torch::Tensor objects;      // uint8 [N, 3, H, W]
  torch::Tensor backgrounds;  // uint8 [M, 3, H, W]
  torch::Tensor eval_images;  // uint8 [K, 3, H, W]
  torch::Tensor eval_masks;   // uint8 [K, 1, H, W], undefined when absent
  torch::Tensor eval_parent;  // int64 [K], 0-based, undefined when absent
  torch::Tensor eval_child;   // int64 [K], 0-based, undefined when absent
  /// Labeled scenes reserved for the oracle classifier.
  torch::Tensor oracle_images;  // uint8 [L, 3, H, W]
  torch::Tensor oracle_child;   // int64 [L], 0-based
};

/// Loads `<root>/manifest.tsv`. Throws ConfigError when the manifest is absent.
Dataset load_dataset(const std::filesystem::path& root, int64_t side);

// ---------------------------------------------------------------------------
// Real-data ingestion.

struct BoundingBox {
  int x = 0, y = 0, width = 0, height = 0;
};

/// One source image with an optional object box (pixels, top-left origin).
struct SourceImage {
  std::string id;  // path relative to the dataset directory
  std::optional<BoundingBox> box;
};

struct DatasetSplit {
  std::vector<std::string> objects;      // source ids feeding X_c
  std::vector<std::string> backgrounds;  // emitted patch ids
  std::vector<std::string> background_sources;
};

/// Number of sources assigned to the object set: floor(0.8 * n).
int64_t object_source_count(int64_t n_sources);

/// Regions left of, right of, above and below the box, keeping those whose
/// shorter side is at least `min_side`.
std::vector<BoundingBox> background_regions(int image_width, int image_height,
                                            const BoundingBox& box, int min_side = 32,
                                            int max_patches = 4);

/// Reads `<boxes>` (lines `relpath x y w h`, or `relpath` alone for images
/// without a box) and writes an ingested dataset under `out_root`. Sources are
/// shuffled with `seed` and split 80/20; the object part is center-cropped and
/// resized, the rest yields background patches. Boxes are read only to cut
/// patches.
DatasetSplit ingest_real(const std::filesystem::path& dataset_dir,
                         const std::filesystem::path& boxes_file,
                         const std::filesystem::path& out_root, int64_t side, uint64_t seed);

std::vector<SourceImage> read_boxes(const std::filesystem::path& boxes_file);

// ---------------------------------------------------------------------------
// Synthetic scenes with ground truth.

struct SyntheticSceneSpec {
  int64_t n_parent = 3;          // shape families
  int64_t colors_per_shape = 4;  // children per parent
  int64_t image_size = 64;
  double fg_min = 0.1;           // foreground pixel fraction bounds
  double fg_max = 0.6;

  int64_t n_child() const { return n_parent * colors_per_shape; }
  void validate() const;
};

struct SyntheticSet {
  torch::Tensor images;       // uint8 [N, 3, H, W]
  torch::Tensor masks;        // uint8 [N, 1, H, W], values {0, 1}
  torch::Tensor parent;       // int64 [N], 0-based
  torch::Tensor child;        // int64 [N], 0-based
  torch::Tensor backgrounds;  // uint8 [M, 3, H, W], pure texture
};

/// Object pose in pixels and radians.
struct ScenePose {
  double cx = 0, cy = 0, scale = 0, angle = 0;
};

/// Polygon of a shape family at the given pose.
std::vector<std::vector<int>> shape_polygon(int64_t parent, const ScenePose& pose);
/// Object support rendered with the scene renderer.
torch::Tensor render_support(int64_t parent, const ScenePose& pose, int64_t side);
/// RGB fill color of a child class.
std::vector<uint8_t> child_color(int64_t child, int64_t n_child);

/// Deterministic under `seed`. `count` scenes and `background_count`
/// object-free textures. Child classes are drawn uniformly; the parent is
/// child / colors_per_shape.
SyntheticSet generate_synthetic(const SyntheticSceneSpec& spec, int64_t count,
                                int64_t background_count, uint64_t seed,
                                std::vector<ScenePose>* poses = nullptr);

/// Writes a dataset root: objects/ and backgrounds/ from `train` (labels
/// withheld), eval/ with masks and labels from `eval`, oracle/ with labels
/// from `oracle`, plus manifest.tsv.
void write_synthetic(const SyntheticSet& train, const SyntheticSet& eval,
                     const SyntheticSet& oracle, const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Batching.

struct IteratorState {
  int64_t epoch = 0;
  int64_t cursor = 0;
  int64_t bg_epoch = 0;
  int64_t bg_cursor = 0;
};

/// Shuffled epochs over the object and background sets. Permutations and
/// flips derive from (seed, epoch), so the stream is reproducible and its
/// position is captured by IteratorState alone.
class BatchIterator {
 public:
  BatchIterator(torch::Tensor objects, torch::Tensor backgrounds, int64_t batch_size,
                uint64_t seed, bool hflip);

  /// (object batch, background batch), float [B, 3, H, W] in [-1, 1].
  std::pair<torch::Tensor, torch::Tensor> next();

  IteratorState state() const { return state_; }
  void set_state(const IteratorState& state) { state_ = state; }
  int64_t batch_size() const { return batch_size_; }

 private:
  torch::Tensor take(const torch::Tensor& source, int64_t& epoch, int64_t& cursor, uint64_t salt);
  std::vector<int64_t> order(int64_t n, int64_t epoch, uint64_t salt) const;

  torch::Tensor objects_;
  torch::Tensor backgrounds_;
  int64_t batch_size_;
  uint64_t seed_;
  bool hflip_;
  IteratorState state_;
};

} // namespace onegan
