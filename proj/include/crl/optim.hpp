#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "crl/data.hpp"
#include "crl/losses.hpp"
#include "crl/models.hpp"

namespace crl::optim {

struct OptimSpec {
  double lr0 = 0.1;
  double momentum = 0.9;
  bool nesterov = true;
  double weight_decay = 1e-4;
  // (epoch fraction, divisor) pairs; fractions strictly increasing in (0,1).
  std::vector<std::pair<double, double>> schedule{{0.5, 10.0}, {0.75, 10.0}};
  std::size_t epochs = 30;
  std::size_t batch_size = 64;

  void validate() const;
};

struct TrainState {
  std::vector<Tensor> velocity;
  std::size_t epoch = 0;
  std::size_t step = 0;
  double current_lr = 0.0;
  std::uint64_t rng_seed = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_error_pct = 0.0;
  double lr = 0.0;
  double wall_time_s = 0.0;
};

// Thrown when a training loss goes non-finite; carries epoch/step context.
class divergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Piecewise-constant step schedule; the divided rate applies from epoch
// floor(fraction * epochs) onward.
double lr_at(const OptimSpec& spec, std::size_t epoch);

// Classic L2 weight decay folded into the gradient, then Nesterov momentum:
//   g <- g + wd * w;  v <- mu * v - lr * g;  w <- w + mu * v - lr * g
// (plain momentum applies w <- w + v). Zeroes gradients afterwards.
void sgd_step(models::Model& model, TrainState& state, const OptimSpec& spec);

using EpochHook = std::function<void(const EpochLog&)>;

// Full training loop: seeded shuffle per epoch, mini-batch iteration with the
// short remainder batch kept, per-epoch test-error evaluation. Deterministic
// for a fixed seed on one thread.
std::vector<EpochLog> fit(models::Model& model, const data::Dataset& dataset,
                          const losses::LossSpec& loss_spec,
                          const OptimSpec& optim_spec, std::uint64_t seed,
                          const EpochHook& hook = {});

// Top-1 test error (%) of the model on a labeled batch, evaluated in batches.
double evaluate_error_pct(models::Model& model, const data::LabeledBatch& batch);

}  // namespace crl::optim
