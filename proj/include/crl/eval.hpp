#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "crl/models.hpp"
#include "crl/tensor.hpp"

namespace crl::eval {

struct MetricsReport {
  double top1_error_pct = 0.0;
  double macro_f1_pct = 0.0;
  std::optional<double> one_off_acc_pct;
  std::vector<std::size_t> confusion;  // C x C row-major, rows = true class
  std::size_t class_count = 0;
  std::size_t n = 0;
};

struct TTestResult {
  double mean_a = 0.0, mean_b = 0.0;
  double std_a = 0.0, std_b = 0.0;
  double t_stat = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  std::size_t n_pairs = 0;
  bool degenerate = false;
};

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;
  double variance = 0.0;
  bool degenerate = false;  // single run
};

double top1_error(std::span<const std::size_t> preds,
                  std::span<const std::size_t> labels);

// A sample counts correct when its label is among the k largest logits;
// logit ties rank the lower class index first.
double topk_error(const Tensor& logits, std::span<const std::size_t> labels,
                  std::size_t k);

// Unweighted mean of per-class F1 with the 0/0 := 0 convention; classes with
// no true and no predicted instances are excluded from the average.
double macro_f1(std::span<const std::size_t> preds,
                std::span<const std::size_t> labels, std::size_t class_count);

double one_off_accuracy(std::span<const std::size_t> preds,
                        std::span<const std::size_t> labels);

std::vector<std::size_t> confusion_matrix(std::span<const std::size_t> preds,
                                          std::span<const std::size_t> labels,
                                          std::size_t class_count);

MetricsReport compute_metrics(std::span<const std::size_t> preds,
                              std::span<const std::size_t> labels,
                              std::size_t class_count,
                              bool ordinal = false);

// Rows are softmax posteriors of the model's logits, one per input sample.
Tensor softmax_heatmap(models::Model& model, const Tensor& inputs);

// Two-sided paired Student's t-test with sample (n-1) standard deviation.
TTestResult paired_t_test(std::span<const double> scores_a,
                          std::span<const double> scores_b);

Aggregate aggregate_runs(std::span<const double> values);

// Regularized incomplete beta I_x(a, b) via Lentz continued fraction.
double incomplete_beta(double a, double b, double x);

// P(T <= t) for Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

}  // namespace crl::eval
