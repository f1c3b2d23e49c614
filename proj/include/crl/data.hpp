#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "crl/tensor.hpp"

namespace crl::data {

struct LabeledBatch {
  Tensor inputs;                    // [N, ...]
  std::vector<std::size_t> labels;  // N entries in [0, C)
  std::size_t class_count = 0;

  std::size_t size() const { return labels.size(); }
};

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Dataset {
  LabeledBatch train;
  LabeledBatch test;
  std::size_t class_count = 0;
  std::vector<std::size_t> input_shape;  // per-sample
  NormStats norm_stats;
};

struct AugmentSpec {
  // (pad pixels, crop size); crop size must not exceed the padded size.
  std::optional<std::pair<std::size_t, std::size_t>> pad_crop;
  double hflip_prob = 0.0;
};

// IDX container (big-endian magic 0x00000803 images / 0x00000801 labels).
// Pixels are scaled to [0, 1]; class count is 10 for digit labels.
LabeledBatch load_idx(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path);

// CIFAR-10 binary batches: 3073-byte records, 1 label byte + channel-planar
// RGB. max_records = 0 loads everything; otherwise the first K records total.
LabeledBatch load_cifar10_bin(const std::vector<std::filesystem::path>& paths,
                              std::size_t max_records = 0);

// Gaussian class clusters around seeded random centers scaled by
// `separation`; 80/20 train/test split by seeded permutation.
Dataset make_blobs(std::size_t class_count, std::size_t per_class_n,
                   std::size_t dim, double separation, std::uint64_t seed);

// Ordinal task: a 1-D latent per sample drawn from class-indexed intervals
// that overlap adjacent classes by `overlap`, so errors concentrate on
// neighboring classes.
Dataset make_ordinal(std::size_t class_count, std::size_t per_class_n,
                     double overlap, std::uint64_t seed);

NormStats compute_stats(const LabeledBatch& train);

// Per-channel (x - mean) / std with a 1e-8 std floor. Stats must come from
// the train split.
LabeledBatch normalize(const LabeledBatch& batch, const NormStats& stats);

// Per-image independent horizontal flip and pad-then-random-crop. Inputs must
// be [N, C, H, W]. Deterministic given the rng state.
LabeledBatch augment(const LabeledBatch& batch, const AugmentSpec& spec,
                     std::mt19937_64& rng);

}  // namespace crl::data
