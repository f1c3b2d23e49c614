#include "crl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crl::losses {

namespace {

constexpr double kProbFloor = 1e-300;

void check_logits(std::span<const double> logits) {
  if (logits.size() < 2)
    throw std::invalid_argument("logits: need at least 2 classes");
  for (double x : logits)
    if (!std::isfinite(x))
      throw std::invalid_argument("logits: non-finite entry");
}

void check_label(std::size_t label, std::size_t class_count) {
  if (label >= class_count)
    throw std::invalid_argument("label out of range");
}

// Sum of competing-class probabilities; used instead of 1 - p_c to avoid
// cancellation when p_c -> 1.
double competing_sum(std::span<const double> p, std::size_t label) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (k != label) s += p[k];
  return std::max(s, kProbFloor);
}

double floored(double q) { return q < kProbFloor ? kProbFloor : q; }

}  // namespace

Variant variant_from_name(std::string_view name) {
  if (name == "cel" || name == "CEL") return Variant::CEL;
  if (name == "bce" || name == "BCE") return Variant::BCE;
  if (name == "cce" || name == "CCE") return Variant::CCE;
  if (name == "nllr" || name == "NLLR") return Variant::NLLR;
  if (name == "crl" || name == "CRL") return Variant::CRL;
  throw std::invalid_argument("unknown loss variant: " + std::string(name));
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::CEL: return "CEL";
    case Variant::BCE: return "BCE";
    case Variant::CCE: return "CCE";
    case Variant::NLLR: return "NLLR";
    case Variant::CRL: return "CRL";
  }
  throw std::logic_error("bad variant");
}

void LossSpec::validate(std::size_t class_count) const {
  if (class_count < 2)
    throw std::invalid_argument("loss: class_count must be >= 2");
  if (variant == Variant::BCE && class_count != 2)
    throw std::invalid_argument("BCE requires exactly 2 classes");
  if (variant == Variant::CRL) {
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
      throw std::invalid_argument("CRL: alpha must be >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta))
      throw std::invalid_argument("CRL: beta must be >= 0");
  }
}

bool positivity_guaranteed(const LossSpec& spec) {
  return spec.variant != Variant::CRL || spec.alpha >= 1.0;
}

std::vector<double> softmax(std::span<const double> logits) {
  check_logits(logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    p[j] = std::exp(logits[j] - m);
    z += p[j];
  }
  for (double& v : p) v = std::max(v / z, kProbFloor);
  return p;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  check_logits(logits);
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double x : logits) z += std::exp(x - m);
  const double logz = std::log(z);
  std::vector<double> out(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j)
    out[j] = logits[j] - m - logz;
  return out;
}

double loss_forward(const LossSpec& spec, std::span<const double> logits,
                    std::size_t label) {
  spec.validate(logits.size());
  check_label(label, logits.size());
  const std::vector<double> ls = log_softmax(logits);
  const double cel = -ls[label];
  switch (spec.variant) {
    case Variant::CEL:
      return cel;
    case Variant::BCE:
      // -[y log p_1 + (1-y) log p_0]; with softmax over two logits the
      // complement probability is exactly the other class.
      return -ls[label];
    case Variant::CCE: {
      const std::vector<double> p = softmax(logits);
      double acc = cel;
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (k == label) continue;
        acc -= p[k] < 1.0 ? std::log1p(-p[k]) : std::log(kProbFloor);
      }
      return acc;
    }
    case Variant::NLLR: {
      const std::vector<double> p = softmax(logits);
      return std::log(competing_sum(p, label)) + cel;
    }
    case Variant::CRL: {
      if (spec.beta == 0.0) return cel;  // exact CEL reduction
      const std::vector<double> p = softmax(logits);
      return spec.beta * std::log(spec.alpha + competing_sum(p, label)) + cel;
    }
  }
  throw std::logic_error("bad variant");
}

std::vector<double> loss_backward(const LossSpec& spec,
                                  std::span<const double> logits,
                                  std::size_t label) {
  spec.validate(logits.size());
  check_label(label, logits.size());
  const std::vector<double> p = softmax(logits);
  const std::size_t C = p.size();
  std::vector<double> g(C);

  auto scaled_residual = [&](double m) {
    for (std::size_t j = 0; j < C; ++j)
      g[j] = m * (p[j] - (j == label ? 1.0 : 0.0));
  };

  switch (spec.variant) {
    case Variant::CEL:
    case Variant::BCE:
      scaled_residual(1.0);
      break;
    case Variant::CRL: {
      const double s = competing_sum(p, label);
      scaled_residual(1.0 + spec.beta * p[label] / (spec.alpha + s));
      break;
    }
    case Variant::NLLR: {
      scaled_residual(1.0 / competing_sum(p, label));
      break;
    }
    case Variant::CCE: {
      double r = 0.0;
      for (std::size_t k = 0; k < C; ++k)
        if (k != label) r += p[k] / floored(1.0 - p[k]);
      for (std::size_t j = 0; j < C; ++j) {
        g[j] = p[j] - (j == label ? 1.0 : 0.0) - p[j] * r;
        if (j != label) g[j] += p[j] / floored(1.0 - p[j]);
      }
      break;
    }
  }
  return g;
}

std::vector<double> finite_diff_grad(const LossSpec& spec,
                                     std::span<const double> logits,
                                     std::size_t label, double h) {
  if (!(h > 0.0))
    throw std::invalid_argument("finite_diff_grad: h must be > 0");
  std::vector<double> x(logits.begin(), logits.end());
  std::vector<double> g(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double orig = x[j];
    x[j] = orig + h;
    const double up = loss_forward(spec, x, label);
    x[j] = orig - h;
    const double dn = loss_forward(spec, x, label);
    x[j] = orig;
    g[j] = (up - dn) / (2.0 * h);
  }
  return g;
}

std::vector<CurveSample> gradient_curve(std::span<const LossSpec> family,
                                        std::span<const double> p_c_grid,
                                        double p_j_fixed) {
  if (!(p_j_fixed > 0.0 && p_j_fixed < 1.0))
    throw std::invalid_argument("gradient_curve: p_j must be in (0,1)");
  for (double pc : p_c_grid)
    if (!(pc > 0.0 && pc < 1.0))
      throw std::invalid_argument("gradient_curve: p_c grid must be in (0,1)");

  std::vector<CurveSample> out;
  out.reserve(family.size() * p_c_grid.size());
  for (const LossSpec& spec : family) {
    for (double pc : p_c_grid) {
      CurveSample s;
      s.p_c = pc;
      s.loss_label = std::string(variant_name(spec.variant));
      switch (spec.variant) {
        case Variant::CEL:
          s.alpha = 0.0;
          s.beta = 0.0;
          s.value_printed = p_j_fixed;
          s.value_analytic = p_j_fixed;
          break;
        case Variant::NLLR: {
          if (pc == 1.0) continue;  // division guard, point flagged out
          s.alpha = 0.0;
          s.beta = 1.0;
          s.value_printed = (1.0 - pc / (1.0 - pc)) * p_j_fixed;
          s.value_analytic = p_j_fixed / (1.0 - pc);
          break;
        }
        case Variant::CRL: {
          const double denom = spec.alpha + 1.0 - pc;
          s.alpha = spec.alpha;
          s.beta = spec.beta;
          s.value_printed = (1.0 - spec.beta * pc / denom) * p_j_fixed;
          s.value_analytic = (1.0 + spec.beta * pc / denom) * p_j_fixed;
          break;
        }
        default:
          throw std::invalid_argument(
              "gradient_curve: only CEL/NLLR/CRL curves are defined");
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::pair<double, Tensor> batch_loss(const LossSpec& spec,
                                     const Tensor& logit_batch,
                                     std::span<const std::size_t> labels) {
  if (logit_batch.shape.size() != 2)
    throw std::invalid_argument("batch_loss: logits must be [N, C]");
  const std::size_t n = logit_batch.shape[0];
  const std::size_t C = logit_batch.shape[1];
  if (n == 0) throw std::invalid_argument("batch_loss: empty batch");
  if (labels.size() != n)
    throw std::invalid_argument("batch_loss: label count mismatch");

  Tensor grads({n, C});
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> row(&logit_batch.data[i * C], C);
    total += loss_forward(spec, row, labels[i]);
    const std::vector<double> g = loss_backward(spec, row, labels[i]);
    for (std::size_t j = 0; j < C; ++j) grads.data[i * C + j] = g[j] * inv_n;
  }
  return {total * inv_n, std::move(grads)};
}

}  // namespace crl::losses
