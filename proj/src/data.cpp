#include "crl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

namespace crl::data {

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

std::uint32_t read_u32_be(const std::vector<unsigned char>& b,
                          std::size_t off) {
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

std::string hex(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

// Per-channel layout of a batch: [N, C, H, W] has C channels; everything
// else is treated as one channel.
std::size_t channel_count(const Tensor& inputs) {
  return inputs.shape.size() == 4 ? inputs.shape[1] : 1;
}

std::size_t channel_stride(const Tensor& inputs) {
  return inputs.shape.size() == 4 ? inputs.shape[2] * inputs.shape[3]
                                  : Tensor::numel_of(inputs.shape) /
                                        inputs.shape[0];
}

Dataset split_80_20(Tensor inputs, std::vector<std::size_t> labels,
                    std::size_t class_count, std::uint64_t seed) {
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0xbb67ae8584caa73bull);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_train = n * 8 / 10;

  std::size_t per = inputs.numel() / n;
  auto gather = [&](std::size_t begin, std::size_t end) {
    LabeledBatch out;
    std::vector<std::size_t> shape = inputs.shape;
    shape[0] = end - begin;
    out.inputs = Tensor(shape);
    out.labels.resize(end - begin);
    out.class_count = class_count;
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t src = order[i];
      std::copy_n(inputs.data.begin() + src * per, per,
                  out.inputs.data.begin() + (i - begin) * per);
      out.labels[i - begin] = labels[src];
    }
    return out;
  };

  Dataset ds;
  ds.train = gather(0, n_train);
  ds.test = gather(n_train, n);
  ds.class_count = class_count;
  ds.input_shape.assign(inputs.shape.begin() + 1, inputs.shape.end());
  ds.norm_stats = compute_stats(ds.train);
  return ds;
}

}  // namespace

LabeledBatch load_idx(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (img.size() < 16)
    throw std::runtime_error("idx images: file too short for header");
  if (lab.size() < 8)
    throw std::runtime_error("idx labels: file too short for header");

  const std::uint32_t img_magic = read_u32_be(img, 0);
  if (img_magic != 0x00000803u)
    throw std::runtime_error("idx images: bad magic " + hex(img_magic) +
                             " (expected 0x00000803)");
  const std::uint32_t lab_magic = read_u32_be(lab, 0);
  if (lab_magic != 0x00000801u)
    throw std::runtime_error("idx labels: bad magic " + hex(lab_magic) +
                             " (expected 0x00000801)");

  const std::size_t n = read_u32_be(img, 4);
  const std::size_t h = read_u32_be(img, 8);
  const std::size_t w = read_u32_be(img, 12);
  const std::size_t n_lab = read_u32_be(lab, 4);
  if (n != n_lab)
    throw std::runtime_error("idx: image count " + std::to_string(n) +
                             " != label count " + std::to_string(n_lab));
  if (img.size() != 16 + n * h * w)
    throw std::runtime_error("idx images: truncated or oversized payload");
  if (lab.size() != 8 + n)
    throw std::runtime_error("idx labels: truncated or oversized payload");

  LabeledBatch out;
  out.class_count = 10;
  out.inputs = Tensor({n, h, w});
  out.labels.resize(n);
  for (std::size_t i = 0; i < n * h * w; ++i)
    out.inputs.data[i] = img[16 + i] / 255.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.labels[i] = lab[8 + i];
    if (out.labels[i] >= out.class_count)
      throw std::runtime_error("idx labels: label out of range [0,10)");
  }
  return out;
}

LabeledBatch load_cifar10_bin(const std::vector<std::filesystem::path>& paths,
                              std::size_t max_records) {
  constexpr std::size_t kRecord = 3073;
  LabeledBatch out;
  out.class_count = 10;
  std::vector<double> pixels;
  for (const auto& path : paths) {
    if (max_records && out.labels.size() >= max_records) break;
    const auto bytes = read_file(path);
    if (bytes.size() % kRecord != 0)
      throw std::runtime_error("cifar10: file size not a multiple of 3073: " +
                               path.string());
    std::size_t records = bytes.size() / kRecord;
    if (max_records)
      records = std::min(records, max_records - out.labels.size());
    for (std::size_t r = 0; r < records; ++r) {
      const unsigned char* rec = bytes.data() + r * kRecord;
      if (rec[0] >= 10)
        throw std::runtime_error("cifar10: label out of range [0,10)");
      out.labels.push_back(rec[0]);
      for (std::size_t i = 0; i < 3072; ++i)
        pixels.push_back(rec[1 + i] / 255.0);
    }
  }
  out.inputs = Tensor({out.labels.size(), 3, 32, 32}, std::move(pixels));
  return out;
}

Dataset make_blobs(std::size_t class_count, std::size_t per_class_n,
                   std::size_t dim, double separation, std::uint64_t seed) {
  if (class_count < 2) throw std::invalid_argument("make_blobs: C >= 2");
  if (dim < 1) throw std::invalid_argument("make_blobs: dim >= 1");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> centers(class_count,
                                           std::vector<double>(dim));
  for (auto& c : centers)
    for (double& v : c) v = separation * normal(rng);

  const std::size_t n = class_count * per_class_n;
  Tensor inputs({n, dim});
  std::vector<std::size_t> labels(n);
  for (std::size_t c = 0; c < class_count; ++c)
    for (std::size_t i = 0; i < per_class_n; ++i) {
      const std::size_t idx = c * per_class_n + i;
      labels[idx] = c;
      for (std::size_t d = 0; d < dim; ++d)
        inputs.data[idx * dim + d] = centers[c][d] + normal(rng);
    }
  return split_80_20(std::move(inputs), std::move(labels), class_count, seed);
}

Dataset make_ordinal(std::size_t class_count, std::size_t per_class_n,
                     double overlap, std::uint64_t seed) {
  if (class_count < 3) throw std::invalid_argument("make_ordinal: C >= 3");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 0.1);

  // Class c owns [c * (1 - overlap), c * (1 - overlap) + 1); adjacent
  // intervals share a window of width `overlap`.
  const std::size_t n = class_count * per_class_n;
  const std::size_t dim = 2;
  Tensor inputs({n, dim});
  std::vector<std::size_t> labels(n);
  for (std::size_t c = 0; c < class_count; ++c)
    for (std::size_t i = 0; i < per_class_n; ++i) {
      const std::size_t idx = c * per_class_n + i;
      labels[idx] = c;
      const double latent = c * (1.0 - overlap) + unif(rng);
      inputs.data[idx * dim + 0] = latent;
      inputs.data[idx * dim + 1] = normal(rng);
    }
  return split_80_20(std::move(inputs), std::move(labels), class_count, seed);
}

NormStats compute_stats(const LabeledBatch& train) {
  const std::size_t n = train.size();
  if (n == 0) throw std::invalid_argument("compute_stats: empty batch");
  const std::size_t channels = channel_count(train.inputs);
  const std::size_t stride = channel_stride(train.inputs);
  const std::size_t per = train.inputs.numel() / n;

  NormStats stats;
  stats.mean.assign(channels, 0.0);
  stats.stddev.assign(channels, 0.0);
  const double count = static_cast<double>(n) * stride;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t k = 0; k < stride; ++k)
        stats.mean[c] += train.inputs.data[i * per + c * stride + k];
  for (double& m : stats.mean) m /= count;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t k = 0; k < stride; ++k) {
        const double d =
            train.inputs.data[i * per + c * stride + k] - stats.mean[c];
        stats.stddev[c] += d * d;
      }
  for (double& s : stats.stddev) s = std::sqrt(s / count);
  return stats;
}

LabeledBatch normalize(const LabeledBatch& batch, const NormStats& stats) {
  const std::size_t n = batch.size();
  const std::size_t channels = channel_count(batch.inputs);
  const std::size_t stride = channel_stride(batch.inputs);
  const std::size_t per = batch.inputs.numel() / n;
  if (stats.mean.size() != channels)
    throw std::invalid_argument("normalize: channel count mismatch");

  LabeledBatch out = batch;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < channels; ++c) {
      const double sd = std::max(stats.stddev[c], 1e-8);
      for (std::size_t k = 0; k < stride; ++k) {
        double& v = out.inputs.data[i * per + c * stride + k];
        v = (v - stats.mean[c]) / sd;
      }
    }
  return out;
}

LabeledBatch augment(const LabeledBatch& batch, const AugmentSpec& spec,
                     std::mt19937_64& rng) {
  if (batch.inputs.shape.size() != 4)
    throw std::invalid_argument("augment: inputs must be [N, C, H, W]");
  const std::size_t n = batch.inputs.shape[0], c = batch.inputs.shape[1],
                    h = batch.inputs.shape[2], w = batch.inputs.shape[3];
  if (spec.pad_crop) {
    const auto [pad, crop] = *spec.pad_crop;
    if (crop > h + 2 * pad || crop > w + 2 * pad)
      throw std::invalid_argument("augment: crop larger than padded image");
    if (crop != h || crop != w)
      throw std::invalid_argument(
          "augment: crop size must match the input size");
  }

  LabeledBatch out = batch;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double* img = out.inputs.data.data() + i * c * h * w;
    if (spec.hflip_prob > 0.0 && unif(rng) < spec.hflip_prob) {
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y) {
          double* row = img + (ch * h + y) * w;
          std::reverse(row, row + w);
        }
    }
    if (spec.pad_crop) {
      const auto [pad, crop] = *spec.pad_crop;
      std::uniform_int_distribution<std::size_t> off(0, h + 2 * pad - crop);
      const std::size_t oy = off(rng);
      const std::size_t ox = off(rng);
      std::vector<double> src(img, img + c * h * w);
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < crop; ++y)
          for (std::size_t x = 0; x < crop; ++x) {
            const long sy = static_cast<long>(y + oy) - static_cast<long>(pad);
            const long sx = static_cast<long>(x + ox) - static_cast<long>(pad);
            double v = 0.0;
            if (sy >= 0 && sy < static_cast<long>(h) && sx >= 0 &&
                sx < static_cast<long>(w))
              v = src[(ch * h + sy) * w + sx];
            img[(ch * crop + y) * crop + x] = v;
          }
    }
  }
  return out;
}

}  // namespace crl::data
