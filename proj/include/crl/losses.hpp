#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crl/tensor.hpp"

namespace crl::losses {

enum class Variant { CEL, BCE, CCE, NLLR, CRL };

Variant variant_from_name(std::string_view name);
std::string_view variant_name(Variant v);

// Which loss to compute. alpha/beta only matter for CRL.
struct LossSpec {
  Variant variant = Variant::CEL;
  double alpha = 1.5;
  double beta = 1.0;

  // Throws on invalid configuration (negative alpha/beta, BCE with C != 2).
  void validate(std::size_t class_count) const;
};

// True when the CRL value is guaranteed positive for all inputs (alpha >= 1).
bool positivity_guaranteed(const LossSpec& spec);

// Numerically stable softmax (max-subtraction). Outputs are clamped to a
// 1e-300 floor so every entry stays strictly positive.
std::vector<double> softmax(std::span<const double> logits);

// log p_j = x_j - max(x) - log sum exp(x_k - max(x)).
std::vector<double> log_softmax(std::span<const double> logits);

// Per-sample loss value, natural log throughout.
double loss_forward(const LossSpec& spec, std::span<const double> logits,
                    std::size_t label);

// Analytic gradient of loss_forward with respect to each logit.
std::vector<double> loss_backward(const LossSpec& spec,
                                  std::span<const double> logits,
                                  std::size_t label);

// Central-difference gradient estimate, [L(x+h e_j) - L(x-h e_j)] / 2h.
std::vector<double> finite_diff_grad(const LossSpec& spec,
                                     std::span<const double> logits,
                                     std::size_t label, double h);

// One point of a gradient-vs-p_c curve. value_printed is the ratio-form
// display expression with p_j factored out; value_analytic is the exact
// derivative of the loss with respect to a competing logit.
struct CurveSample {
  double p_c = 0.0;
  double value_printed = 0.0;
  double value_analytic = 0.0;
  std::string loss_label;
  double beta = 0.0;
  double alpha = 0.0;
};

std::vector<CurveSample> gradient_curve(std::span<const LossSpec> family,
                                        std::span<const double> p_c_grid,
                                        double p_j_fixed);

// Mean loss over a [N, C] logit batch plus per-sample gradients scaled by
// 1/N, so step sizes are batch-size invariant in expectation.
std::pair<double, Tensor> batch_loss(const LossSpec& spec,
                                     const Tensor& logit_batch,
                                     std::span<const std::size_t> labels);

}  // namespace crl::losses
