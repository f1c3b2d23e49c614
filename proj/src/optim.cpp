#include "crl/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace crl::optim {

void OptimSpec::validate() const {
  if (!(lr0 > 0.0)) throw std::invalid_argument("optim: lr0 must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw std::invalid_argument("optim: momentum must be in [0,1)");
  if (weight_decay < 0.0)
    throw std::invalid_argument("optim: weight_decay must be >= 0");
  if (epochs == 0) throw std::invalid_argument("optim: epochs must be >= 1");
  if (batch_size == 0)
    throw std::invalid_argument("optim: batch_size must be >= 1");
  double prev = 0.0;
  for (const auto& [frac, div] : schedule) {
    if (!(frac > prev && frac < 1.0))
      throw std::invalid_argument(
          "optim: schedule fractions must be strictly increasing in (0,1)");
    if (!(div > 1.0))
      throw std::invalid_argument("optim: schedule divisors must be > 1");
    prev = frac;
  }
}

double lr_at(const OptimSpec& spec, std::size_t epoch) {
  spec.validate();
  if (epoch >= spec.epochs)
    throw std::invalid_argument("lr_at: epoch out of range");
  double lr = spec.lr0;
  for (const auto& [frac, div] : spec.schedule) {
    const auto boundary = static_cast<std::size_t>(
        std::floor(frac * static_cast<double>(spec.epochs)));
    if (epoch >= boundary) lr /= div;
  }
  return lr;
}

void sgd_step(models::Model& model, TrainState& state, const OptimSpec& spec) {
  if (!model.grads_ready())
    throw std::logic_error("sgd_step before backward on the current batch");
  auto params = model.params();
  auto grads = model.grads();
  if (state.velocity.size() != params.size()) {
    state.velocity.clear();
    for (Tensor* p : params) state.velocity.emplace_back(p->shape);
  }
  const double lr = state.current_lr;
  const double mu = spec.momentum;
  for (std::size_t t = 0; t < params.size(); ++t) {
    double* w = params[t]->data.data();
    double* g = grads[t]->data.data();
    double* v = state.velocity[t].data.data();
    const std::size_t n = params[t]->numel();
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i] + spec.weight_decay * w[i];
      v[i] = mu * v[i] - lr * gi;
      w[i] += spec.nesterov ? mu * v[i] - lr * gi : v[i];
    }
  }
  model.zero_grads();
  ++state.step;
}

double evaluate_error_pct(models::Model& model,
                          const data::LabeledBatch& batch) {
  model.eval_mode();
  const std::size_t n = batch.size();
  const std::size_t per = batch.inputs.numel() / n;
  constexpr std::size_t kEvalBatch = 512;
  std::size_t wrong = 0;
  for (std::size_t start = 0; start < n; start += kEvalBatch) {
    const std::size_t count = std::min(kEvalBatch, n - start);
    std::vector<std::size_t> shape = batch.inputs.shape;
    shape[0] = count;
    Tensor chunk(shape);
    std::copy_n(batch.inputs.data.begin() + start * per, count * per,
                chunk.data.begin());
    const auto preds = model.predict(chunk);
    for (std::size_t i = 0; i < count; ++i)
      if (preds[i] != batch.labels[start + i]) ++wrong;
  }
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(n);
}

std::vector<EpochLog> fit(models::Model& model, const data::Dataset& dataset,
                          const losses::LossSpec& loss_spec,
                          const OptimSpec& optim_spec, std::uint64_t seed,
                          const EpochHook& hook) {
  optim_spec.validate();
  loss_spec.validate(dataset.class_count);
  const std::size_t n = dataset.train.size();
  if (n == 0) throw std::invalid_argument("fit: empty training set");

  const std::size_t per = dataset.train.inputs.numel() / n;
  std::mt19937_64 shuffle_rng(seed ^ 0x3c6ef372fe94f82bull);
  TrainState state;
  state.rng_seed = seed;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochLog> logs;
  for (std::size_t epoch = 0; epoch < optim_spec.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    state.epoch = epoch;
    state.current_lr = lr_at(optim_spec, epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    model.train_mode();
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += optim_spec.batch_size) {
      const std::size_t count = std::min(optim_spec.batch_size, n - start);
      std::vector<std::size_t> shape = dataset.train.inputs.shape;
      shape[0] = count;
      Tensor batch(shape);
      std::vector<std::size_t> labels(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order[start + i];
        std::copy_n(dataset.train.inputs.data.begin() + src * per, per,
                    batch.data.begin() + i * per);
        labels[i] = dataset.train.labels[src];
      }
      Tensor logits = model.forward(batch);
      for (double z : logits.data)
        if (!std::isfinite(z))
          throw divergence_error("non-finite logits at epoch " +
                                 std::to_string(epoch) + ", step " +
                                 std::to_string(state.step));
      auto [mean_loss, grads] = losses::batch_loss(loss_spec, logits, labels);
      if (!std::isfinite(mean_loss))
        throw divergence_error("non-finite loss at epoch " +
                               std::to_string(epoch) + ", step " +
                               std::to_string(state.step));
      loss_sum += mean_loss * static_cast<double>(count);
      model.backward(grads);
      sgd_step(model, state, optim_spec);
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(n);
    log.test_error_pct = evaluate_error_pct(model, dataset.test);
    log.lr = state.current_lr;
    log.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (hook) hook(log);
    logs.push_back(log);
  }
  model.eval_mode();
  return logs;
}

}  // namespace crl::optim
