#include "crl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "crl/losses.hpp"
#include "crl/models.hpp"

namespace crl::gradcheck {

namespace {

constexpr double kH = 1e-5;

double rel_err(const std::vector<double>& got, const std::vector<double>& ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num = std::max(num, std::fabs(got[i] - ref[i]));
    den = std::max(den, std::fabs(ref[i]));
  }
  return num / std::max(den, 1e-8);
}

// The sign-flipped ratio-form gradient (mutation target).
std::vector<double> flipped_backward(const losses::LossSpec& spec,
                                     std::span<const double> logits,
                                     std::size_t label) {
  const auto p = losses::softmax(logits);
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (k != label) s += p[k];
  double m = 1.0;
  if (spec.variant == losses::Variant::CRL)
    m = 1.0 - spec.beta * p[label] / (spec.alpha + s);
  else if (spec.variant == losses::Variant::NLLR)
    m = 1.0 - p[label] / s;
  std::vector<double> g(p.size());
  for (std::size_t j = 0; j < p.size(); ++j)
    g[j] = m * (p[j] - (j == label ? 1.0 : 0.0));
  return g;
}

}  // namespace

std::vector<CheckResult> check_losses(std::size_t n_cases, std::uint64_t seed,
                                      double threshold,
                                      bool crl_sign_flipped) {
  using losses::LossSpec;
  using losses::Variant;
  const std::vector<Variant> variants = {Variant::CEL, Variant::BCE,
                                         Variant::CCE, Variant::NLLR,
                                         Variant::CRL};
  const std::vector<std::size_t> class_counts = {2, 3, 10, 100};

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logit_dist(-6.0, 6.0);
  std::uniform_real_distribution<double> alpha_dist(0.0, 2.0);
  std::uniform_real_distribution<double> beta_dist(
      crl_sign_flipped ? 0.25 : 0.0, 1.25);

  std::vector<CheckResult> results;
  for (Variant v : variants) {
    CheckResult res;
    res.component = std::string("loss/") + std::string(losses::variant_name(v));
    res.threshold = threshold;
    for (std::size_t C : class_counts) {
      if (v == Variant::BCE && C != 2) continue;
      for (std::size_t i = 0; i < n_cases; ++i) {
        std::vector<double> logits(C);
        for (double& x : logits) x = logit_dist(rng);
        std::uniform_int_distribution<std::size_t> label_dist(0, C - 1);
        const std::size_t label = label_dist(rng);
        LossSpec spec{v, alpha_dist(rng), beta_dist(rng)};

        std::vector<double> g;
        if (crl_sign_flipped &&
            (v == Variant::CRL || v == Variant::NLLR))
          g = flipped_backward(spec, logits, label);
        else
          g = losses::loss_backward(spec, logits, label);
        const auto fd = losses::finite_diff_grad(spec, logits, label, kH);
        const double e = rel_err(g, fd);
        if (e > res.worst_rel_err) {
          res.worst_rel_err = e;
          std::ostringstream os;
          os << "C=" << C << " label=" << label << " alpha=" << spec.alpha
             << " beta=" << spec.beta << " logits=[";
          for (std::size_t j = 0; j < C; ++j)
            os << (j ? "," : "") << logits[j];
          os << "]";
          res.worst_case = os.str();
        }
      }
    }
    res.pass = res.worst_rel_err <= threshold;
    results.push_back(std::move(res));
  }
  return results;
}

namespace {

// Finite differences of the mean cross-entropy of the model output, with the
// dropout stream pinned so every forward sees the same masks.
double model_loss(models::Model& model, const Tensor& inputs,
                  const std::vector<std::size_t>& labels,
                  std::uint64_t mask_seed) {
  model.reseed_dropout(mask_seed);
  model.train_mode();
  Tensor logits = model.forward(inputs);
  losses::LossSpec spec{losses::Variant::CEL};
  return losses::batch_loss(spec, logits, labels).first;
}

CheckResult check_model(const std::string& name,
                        std::vector<models::LayerSpec> specs,
                        std::vector<std::size_t> input_shape,
                        std::size_t class_count, std::uint64_t seed,
                        double threshold) {
  models::Model model(std::move(specs), input_shape, class_count, seed);
  std::mt19937_64 rng(seed ^ 0x510e527fade682d1ull);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t n = 2;
  std::vector<std::size_t> shape{n};
  for (std::size_t d : input_shape) shape.push_back(d);
  Tensor inputs(shape);
  for (double& v : inputs.data) v = normal(rng);
  std::vector<std::size_t> labels(n);
  std::uniform_int_distribution<std::size_t> label_dist(0, class_count - 1);
  for (auto& l : labels) l = label_dist(rng);

  const std::uint64_t mask_seed = seed ^ 0x9b05688c2b3e6c1full;

  // Analytic gradients.
  model.zero_grads();
  model.reseed_dropout(mask_seed);
  model.train_mode();
  Tensor logits = model.forward(inputs);
  losses::LossSpec cel{losses::Variant::CEL};
  auto [loss, logit_grads] = losses::batch_loss(cel, logits, labels);
  const Tensor input_grads = model.backward(logit_grads);

  CheckResult res;
  res.component = "layer/" + name;
  res.threshold = threshold;

  auto probe = [&](Tensor& target, const std::vector<double>& analytic,
                   const char* what) {
    std::vector<double> fd(target.numel());
    for (std::size_t i = 0; i < target.numel(); ++i) {
      const double orig = target.data[i];
      target.data[i] = orig + kH;
      const double up = model_loss(model, inputs, labels, mask_seed);
      target.data[i] = orig - kH;
      const double dn = model_loss(model, inputs, labels, mask_seed);
      target.data[i] = orig;
      fd[i] = (up - dn) / (2.0 * kH);
    }
    const double e = rel_err(analytic, fd);
    if (e > res.worst_rel_err) {
      res.worst_rel_err = e;
      res.worst_case = what;
    }
  };

  auto params = model.params();
  auto grads = model.grads();
  for (std::size_t t = 0; t < params.size(); ++t)
    probe(*params[t], grads[t]->data,
          ("param tensor " + std::to_string(t)).c_str());
  probe(inputs, input_grads.data, "inputs");

  res.pass = res.worst_rel_err <= threshold;
  return res;
}

}  // namespace

std::vector<CheckResult> check_layers(std::uint64_t seed, double threshold) {
  using LS = models::LayerSpec;
  std::vector<CheckResult> results;
  results.push_back(check_model("linear", {LS::linear(6, 4)}, {6}, 4, seed,
                                threshold));
  results.push_back(check_model(
      "relu",
      {LS::linear(5, 8), LS::relu(), LS::linear(8, 3)}, {5}, 3, seed + 1,
      threshold));
  results.push_back(check_model(
      "dropout",
      {LS::linear(5, 8), LS::dropout(0.5), LS::linear(8, 3)}, {5}, 3,
      seed + 2, threshold));
  results.push_back(check_model(
      "conv2d",
      {LS::conv2d(2, 3, 3, 1, 1), LS::relu(), LS::flatten(),
       LS::linear(3 * 5 * 5, 3)},
      {2, 5, 5}, 3, seed + 3, threshold));
  results.push_back(check_model(
      "conv2d_strided",
      {LS::conv2d(1, 2, 3, 2, 0), LS::flatten(), LS::linear(2 * 3 * 3, 2)},
      {1, 7, 7}, 2, seed + 4, threshold));
  results.push_back(check_model(
      "maxpool2d",
      {LS::maxpool2d(2, 2), LS::flatten(), LS::linear(4, 3)}, {1, 4, 4}, 3,
      seed + 5, threshold));
  results.push_back(check_model(
      "flatten",
      {LS::flatten(), LS::linear(12, 3)}, {3, 2, 2}, 3, seed + 6, threshold));
  return results;
}

bool all_pass(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const CheckResult& r) { return r.pass; });
}

}  // namespace crl::gradcheck
