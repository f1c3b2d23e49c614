#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "crl/tensor.hpp"

namespace crl::models {

struct LayerSpec {
  enum class Kind { linear, conv2d, maxpool2d, relu, dropout, flatten };
  Kind kind = Kind::relu;
  std::size_t in = 0, out = 0;                       // linear
  std::size_t in_ch = 0, out_ch = 0;                 // conv2d
  std::size_t kernel = 0, stride = 1, padding = 0;   // conv2d / maxpool2d
  double rate = 0.0;                                 // dropout

  static LayerSpec linear(std::size_t in, std::size_t out);
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch,
                          std::size_t kernel, std::size_t stride = 1,
                          std::size_t padding = 0);
  static LayerSpec maxpool2d(std::size_t kernel, std::size_t stride);
  static LayerSpec relu();
  static LayerSpec dropout(double rate);
  static LayerSpec flatten();
};

class Layer;

// Layered feed-forward classifier with explicit forward/backward passes and
// per-layer parameter/gradient storage. Single-writer during training.
class Model {
 public:
  Model(std::vector<LayerSpec> specs, std::vector<std::size_t> input_shape,
        std::size_t class_count, std::uint64_t seed);
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;
  ~Model();

  void train_mode() { training_ = true; }
  void eval_mode() { training_ = false; }
  bool training() const { return training_; }

  // inputs: [N, ...input_shape]; returns logits [N, C].
  Tensor forward(const Tensor& inputs);
  // Accumulates parameter gradients from cached activations; returns input
  // gradients. Requires a matching train-mode forward on the same batch.
  Tensor backward(const Tensor& logit_grads);

  void zero_grads();
  bool grads_ready() const { return grads_ready_; }
  void clear_grads_ready() { grads_ready_ = false; }

  std::vector<Tensor*> params();
  std::vector<Tensor*> grads();

  // Argmax per sample, ties broken by lowest class index. Eval mode only.
  std::vector<std::size_t> predict(const Tensor& inputs);

  // Reseeds the dropout mask stream (used by gradient checks that need
  // repeatable train-mode forwards).
  void reseed_dropout(std::uint64_t seed);

  const std::vector<LayerSpec>& layer_specs() const { return specs_; }
  const std::vector<std::size_t>& input_shape() const { return input_shape_; }
  std::size_t class_count() const { return class_count_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<LayerSpec> specs_;
  std::vector<std::size_t> input_shape_;
  std::size_t class_count_ = 0;
  std::uint64_t seed_ = 0;
  bool training_ = false;
  bool forward_cached_ = false;
  bool grads_ready_ = false;
  std::mt19937_64 dropout_rng_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Presets: "logreg" (single linear layer), "mlp" (784-ish -> 256 -> C with
// relu and dropout 0.5), "shallow_cnn" (four conv layers followed by two
// fully-connected layers with max-pooling and dropout).
Model build_model(const std::string& preset,
                  std::vector<std::size_t> input_shape,
                  std::size_t class_count, std::uint64_t seed);
Model build_model(std::vector<LayerSpec> specs,
                  std::vector<std::size_t> input_shape,
                  std::size_t class_count, std::uint64_t seed);

// Binary checkpoint: magic "CRLC", one format-version byte, a JSON
// architecture block, then little-endian float64 parameter arrays.
void save_checkpoint(Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace crl::models
