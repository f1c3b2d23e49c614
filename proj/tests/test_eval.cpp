#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "crl/eval.hpp"

using namespace crl;

TEST_CASE("regularized incomplete beta on closed-form cases") {
  // I_x(1,1) = x, I_x(2,2) = 3x^2 - 2x^3.
  for (double x : {0.0, 0.1, 0.35, 0.5, 0.8, 1.0}) {
    CHECK(eval::incomplete_beta(1.0, 1.0, x) ==
          doctest::Approx(x).epsilon(1e-12));
    CHECK(eval::incomplete_beta(2.0, 2.0, x) ==
          doctest::Approx(3 * x * x - 2 * x * x * x).epsilon(1e-12));
  }
  // Symmetry: I_x(a,b) = 1 - I_{1-x}(b,a).
  CHECK(eval::incomplete_beta(2.5, 0.5, 0.3) ==
        doctest::Approx(1.0 - eval::incomplete_beta(0.5, 2.5, 0.7))
            .epsilon(1e-12));
  CHECK_THROWS(eval::incomplete_beta(0.0, 1.0, 0.5));
  CHECK_THROWS(eval::incomplete_beta(1.0, 1.0, 1.5));
}

TEST_CASE("student t cdf reduces to the Cauchy distribution at dof=1") {
  const double pi = std::numbers::pi;
  for (double t : {-3.0, -1.0, 0.0, 1.0, 2.5}) {
    CHECK(eval::student_t_cdf(t, 1.0) ==
          doctest::Approx(0.5 + std::atan(t) / pi).epsilon(1e-10));
  }
  CHECK(eval::student_t_cdf(0.0, 7.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(eval::student_t_cdf(1e308, 4.0) == doctest::Approx(1.0));
}

TEST_CASE("classification metrics on worked examples") {
  const std::vector<std::size_t> preds{1, 1, 0, 0};
  const std::vector<std::size_t> labels{1, 0, 0, 0};
  CHECK(eval::top1_error(preds, labels) == doctest::Approx(25.0));
  // Class 0: P=1, R=2/3, F1=0.8; class 1: P=0.5, R=1, F1=2/3.
  CHECK(eval::macro_f1(preds, labels, 2) ==
        doctest::Approx(100.0 * (0.8 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
  CHECK(eval::macro_f1(preds, labels, 2) ==
        doctest::Approx(73.33).epsilon(1e-3));

  const auto cm = eval::confusion_matrix(preds, labels, 2);
  CHECK(cm == std::vector<std::size_t>{2, 1, 0, 1});

  // A class absent from labels and predictions is excluded, not zero-scored.
  CHECK(eval::macro_f1(preds, labels, 5) ==
        doctest::Approx(eval::macro_f1(preds, labels, 2)).epsilon(1e-12));

  const std::vector<std::size_t> op{0, 1, 3, 4};
  const std::vector<std::size_t> ol{1, 1, 1, 4};
  CHECK(eval::one_off_accuracy(op, ol) == doctest::Approx(75.0));

  const auto report = eval::compute_metrics(preds, labels, 2, false);
  CHECK(report.top1_error_pct == doctest::Approx(25.0));
  CHECK(!report.one_off_acc_pct.has_value());
  const auto ordinal_report = eval::compute_metrics(op, ol, 5, true);
  CHECK(ordinal_report.one_off_acc_pct.has_value());
}

TEST_CASE("top-k error with lowest-index tie ranking") {
  Tensor logits({2, 4}, {0.0, 0.0, 0.0, 0.0,
                         5.0, 4.0, 3.0, 2.0});
  std::vector<std::size_t> labels{0, 2};
  // Row 0: all tied, label 0 ranks first -> correct for any k.
  CHECK(eval::topk_error(logits, labels, 1) == doctest::Approx(50.0));
  CHECK(eval::topk_error(logits, labels, 3) == doctest::Approx(0.0));
  labels = {3, 0};
  CHECK(eval::topk_error(logits, labels, 3) == doctest::Approx(50.0));
  CHECK_THROWS(eval::topk_error(logits, labels, 0));
  CHECK_THROWS(eval::topk_error(logits, labels, 5));
}

TEST_CASE("top-k error concentrates at k/C for random guessing") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t n = 20000, C = 10, k = 5;
  Tensor logits({n, C});
  for (double& v : logits.data) v = unif(rng);
  std::vector<std::size_t> labels(n);
  std::uniform_int_distribution<std::size_t> lab(0, C - 1);
  for (auto& l : labels) l = lab(rng);
  CHECK(eval::topk_error(logits, labels, k) == doctest::Approx(50.0).epsilon(0.02));
}

TEST_CASE("paired t-test matches the frozen oracle") {
  // Differences 1..5: t = 3 / (sqrt(2.5)/sqrt(5)) = 3 sqrt(2) ~ 4.2426.
  const std::vector<double> b{10.0, 20.0, 30.0, 40.0, 50.0};
  std::vector<double> a(b);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += double(i + 1);

  const auto r = eval::paired_t_test(a, b);
  CHECK(r.t_stat == doctest::Approx(4.242640687119285).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.013235599563682690).epsilon(1e-4));
  CHECK(r.dof == 4);
  CHECK(r.n_pairs == 5);
  CHECK(!r.degenerate);

  // Swapping the arms flips t and keeps p.
  const auto s = eval::paired_t_test(b, a);
  CHECK(s.t_stat == doctest::Approx(-r.t_stat).epsilon(1e-12));
  CHECK(s.p_value == doctest::Approx(r.p_value).epsilon(1e-12));
}

TEST_CASE("paired t-test degenerate and error cases") {
  const std::vector<double> same{1.0, 2.0, 3.0};
  const auto eq = eval::paired_t_test(same, same);
  CHECK(eq.degenerate);
  CHECK(eq.t_stat == 0.0);
  CHECK(eq.p_value == 1.0);

  std::vector<double> shifted{2.0, 3.0, 4.0};
  const auto sh = eval::paired_t_test(shifted, same);
  CHECK(sh.degenerate);
  CHECK(std::isinf(sh.t_stat));
  CHECK(sh.t_stat > 0.0);
  CHECK(sh.p_value == 0.0);

  CHECK_THROWS(eval::paired_t_test(std::vector<double>{1.0},
                                   std::vector<double>{2.0}));
  CHECK_THROWS(eval::paired_t_test(std::vector<double>{1.0, 2.0},
                                   std::vector<double>{2.0}));
}

TEST_CASE("p-value decreases monotonically in |t|") {
  const double nu = 9.0;
  double prev = 1.1;
  for (double t = 0.0; t <= 6.0; t += 0.25) {
    const double p = eval::incomplete_beta(nu / 2.0, 0.5, nu / (nu + t * t));
    CHECK(p <= prev + 1e-15);
    prev = p;
  }
}

TEST_CASE("aggregate over runs") {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const auto a = eval::aggregate_runs(v);
  CHECK(a.mean == doctest::Approx(2.5));
  CHECK(a.variance == doctest::Approx(5.0 / 3.0).epsilon(1e-12));
  CHECK(a.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)).epsilon(1e-12));
  CHECK(!a.degenerate);

  const auto single = eval::aggregate_runs(std::vector<double>{7.0});
  CHECK(single.mean == 7.0);
  CHECK(single.degenerate);
  CHECK_THROWS(eval::aggregate_runs(std::vector<double>{}));
}
