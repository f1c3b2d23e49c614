#include "crl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "crl/losses.hpp"

namespace crl::eval {

namespace {

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("preds/labels length mismatch");
  if (a == 0) throw std::invalid_argument("empty inputs");
}

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kFpMin = 1e-300;

  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete_beta: continued fraction diverged");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0))
    throw std::invalid_argument("incomplete_beta: a, b must be > 0");
  if (x < 0.0 || x > 1.0)
    throw std::invalid_argument("incomplete_beta: x must be in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("student_t_cdf: dof > 0");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double half_tail = 0.5 * incomplete_beta(dof / 2.0, 0.5, x);
  return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

double top1_error(std::span<const std::size_t> preds,
                  std::span<const std::size_t> labels) {
  check_lengths(preds.size(), labels.size());
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] != labels[i]) ++wrong;
  return 100.0 * static_cast<double>(wrong) /
         static_cast<double>(preds.size());
}

double topk_error(const Tensor& logits, std::span<const std::size_t> labels,
                  std::size_t k) {
  if (logits.shape.size() != 2)
    throw std::invalid_argument("topk_error: logits must be [N, C]");
  const std::size_t n = logits.shape[0], C = logits.shape[1];
  check_lengths(n, labels.size());
  if (k < 1 || k > C) throw std::invalid_argument("topk_error: k out of range");

  std::size_t wrong = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &logits.data[i * C];
    const std::size_t label = labels[i];
    // Rank of the label under "ties rank the lower index first".
    std::size_t rank = 0;
    for (std::size_t j = 0; j < C; ++j) {
      if (j == label) continue;
      if (row[j] > row[label] || (row[j] == row[label] && j < label)) ++rank;
    }
    if (rank >= k) ++wrong;
  }
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(n);
}

std::vector<std::size_t> confusion_matrix(std::span<const std::size_t> preds,
                                          std::span<const std::size_t> labels,
                                          std::size_t class_count) {
  check_lengths(preds.size(), labels.size());
  std::vector<std::size_t> m(class_count * class_count, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] >= class_count || preds[i] >= class_count)
      throw std::invalid_argument("confusion_matrix: class index out of range");
    ++m[labels[i] * class_count + preds[i]];
  }
  return m;
}

double macro_f1(std::span<const std::size_t> preds,
                std::span<const std::size_t> labels,
                std::size_t class_count) {
  const auto m = confusion_matrix(preds, labels, class_count);
  double sum = 0.0;
  std::size_t included = 0;
  for (std::size_t c = 0; c < class_count; ++c) {
    std::size_t tp = m[c * class_count + c], fp = 0, fn = 0;
    for (std::size_t j = 0; j < class_count; ++j) {
      if (j == c) continue;
      fn += m[c * class_count + j];
      fp += m[j * class_count + c];
    }
    if (tp + fp + fn == 0) continue;  // absent from labels and preds
    const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double r = tp + fn ? double(tp) / double(tp + fn) : 0.0;
    sum += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    ++included;
  }
  return included ? 100.0 * sum / static_cast<double>(included) : 0.0;
}

double one_off_accuracy(std::span<const std::size_t> preds,
                        std::span<const std::size_t> labels) {
  check_lengths(preds.size(), labels.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t d =
        preds[i] > labels[i] ? preds[i] - labels[i] : labels[i] - preds[i];
    if (d <= 1) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(preds.size());
}

MetricsReport compute_metrics(std::span<const std::size_t> preds,
                              std::span<const std::size_t> labels,
                              std::size_t class_count, bool ordinal) {
  MetricsReport r;
  r.top1_error_pct = top1_error(preds, labels);
  r.macro_f1_pct = macro_f1(preds, labels, class_count);
  if (ordinal) r.one_off_acc_pct = one_off_accuracy(preds, labels);
  r.confusion = confusion_matrix(preds, labels, class_count);
  r.class_count = class_count;
  r.n = preds.size();
  return r;
}

Tensor softmax_heatmap(models::Model& model, const Tensor& inputs) {
  if (model.training())
    throw std::logic_error("softmax_heatmap requires eval mode");
  Tensor logits = model.forward(inputs);
  const std::size_t n = logits.shape[0], C = logits.shape[1];
  Tensor out({n, C});
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = losses::softmax(
        std::span<const double>(&logits.data[i * C], C));
    std::copy(p.begin(), p.end(), out.data.begin() + i * C);
  }
  return out;
}

TTestResult paired_t_test(std::span<const double> scores_a,
                          std::span<const double> scores_b) {
  if (scores_a.size() != scores_b.size())
    throw std::invalid_argument("paired_t_test: length mismatch");
  const std::size_t n = scores_a.size();
  if (n < 2) throw std::invalid_argument("paired_t_test: need n >= 2 pairs");

  auto mean_sd = [](std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
  };

  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = scores_a[i] - scores_b[i];

  TTestResult r;
  std::tie(r.mean_a, r.std_a) = mean_sd(scores_a);
  std::tie(r.mean_b, r.std_b) = mean_sd(scores_b);
  r.n_pairs = n;
  r.dof = n - 1;
  const auto [dm, dsd] = mean_sd(d);
  if (dsd == 0.0) {
    r.degenerate = true;
    if (dm == 0.0) {
      r.t_stat = 0.0;
      r.p_value = 1.0;
    } else {
      r.t_stat = dm > 0 ? std::numeric_limits<double>::infinity()
                        : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    return r;
  }
  r.t_stat = dm / (dsd / std::sqrt(static_cast<double>(n)));
  const double nu = static_cast<double>(r.dof);
  r.p_value =
      incomplete_beta(nu / 2.0, 0.5, nu / (nu + r.t_stat * r.t_stat));
  return r;
}

Aggregate aggregate_runs(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("aggregate_runs: empty");
  Aggregate a;
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(values.size());
  if (values.size() == 1) {
    a.degenerate = true;
    return a;
  }
  for (double v : values) a.variance += (v - a.mean) * (v - a.mean);
  a.variance /= static_cast<double>(values.size() - 1);
  a.stddev = std::sqrt(a.variance);
  return a;
}

}  // namespace crl::eval
