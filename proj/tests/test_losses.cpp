#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crl/losses.hpp"

using namespace crl;
using losses::LossSpec;
using losses::Variant;

namespace {

std::vector<double> random_logits(std::mt19937_64& rng, std::size_t C,
                                  double lo = -6.0, double hi = 6.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> x(C);
  for (double& v : x) v = dist(rng);
  return x;
}

}  // namespace

TEST_CASE("loss values on hand-worked examples") {
  // Two classes, uniform posterior: p_c = 0.5.
  std::vector<double> z{0.0, 0.0};
  CHECK(losses::loss_forward({Variant::CEL}, z, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(losses::loss_forward({Variant::BCE}, z, 0) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // NLLR at p_c = 0.5: log(0.5) - log(0.5) = 0.
  CHECK(losses::loss_forward({Variant::NLLR}, z, 0) ==
        doctest::Approx(0.0).epsilon(1e-15));
  // CRL(alpha=1.5, beta=1): log(1.5 + 0.5) - log(0.5) = log 4.
  CHECK(losses::loss_forward({Variant::CRL, 1.5, 1.0}, z, 0) ==
        doctest::Approx(1.3862943611198906).epsilon(1e-15));
  // CCE with uniform three-way posterior.
  std::vector<double> z3{0.0, 0.0, 0.0};
  const double expect = -std::log(1.0 / 3.0) - 2.0 * std::log(2.0 / 3.0);
  CHECK(losses::loss_forward({Variant::CCE}, z3, 1) ==
        doctest::Approx(expect).epsilon(1e-14));
  // Asymmetric logits: CEL([-0.5, 0.5], label 1) = softplus(-1).
  std::vector<double> za{-0.5, 0.5};
  CHECK(losses::loss_forward({Variant::CEL}, za, 1) ==
        doctest::Approx(std::log1p(std::exp(-1.0))).epsilon(1e-14));
}

TEST_CASE("softmax is stable for extreme logits and sums to one") {
  for (double scale : {1.0, 1e2, 1e4}) {
    std::vector<double> z{scale, -scale, 0.0};
    const auto p = losses::softmax(z);
    double sum = 0.0;
    for (double v : p) {
      CHECK(std::isfinite(v));
      CHECK(v > 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("log_softmax matches log of softmax") {
  std::mt19937_64 rng(5);
  const auto z = random_logits(rng, 7);
  const auto p = losses::softmax(z);
  const auto lp = losses::log_softmax(z);
  for (std::size_t j = 0; j < z.size(); ++j)
    CHECK(lp[j] == doctest::Approx(std::log(p[j])).epsilon(1e-12));
}

TEST_CASE("CRL with beta=0 reduces to CEL bitwise") {
  std::mt19937_64 rng(42);
  for (std::size_t i = 0; i < 100000; ++i) {
    const std::size_t C = 2 + (i % 9);
    const auto z = random_logits(rng, C);
    const std::size_t label = i % C;
    const LossSpec crl{Variant::CRL, 1.5, 0.0};
    const LossSpec cel{Variant::CEL};
    REQUIRE(losses::loss_forward(crl, z, label) ==
            losses::loss_forward(cel, z, label));
    const auto ga = losses::loss_backward(crl, z, label);
    const auto gb = losses::loss_backward(cel, z, label);
    for (std::size_t j = 0; j < C; ++j) REQUIRE(ga[j] == gb[j]);
  }
}

TEST_CASE("CRL with alpha=0, beta=1 matches NLLR within 1e-12") {
  std::mt19937_64 rng(43);
  for (std::size_t i = 0; i < 100000; ++i) {
    const std::size_t C = 2 + (i % 9);
    const auto z = random_logits(rng, C);
    const std::size_t label = i % C;
    const LossSpec crl{Variant::CRL, 0.0, 1.0};
    const LossSpec nllr{Variant::NLLR};
    REQUIRE(losses::loss_forward(crl, z, label) ==
            doctest::Approx(losses::loss_forward(nllr, z, label))
                .epsilon(1e-12));
    const auto ga = losses::loss_backward(crl, z, label);
    const auto gb = losses::loss_backward(nllr, z, label);
    for (std::size_t j = 0; j < C; ++j)
      REQUIRE(ga[j] == doctest::Approx(gb[j]).epsilon(1e-12));
  }
}

TEST_CASE("CRL is positive whenever alpha >= 1") {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> alpha_dist(1.0, 3.0);
  std::uniform_real_distribution<double> beta_dist(0.0, 2.0);
  for (std::size_t i = 0; i < 20000; ++i) {
    const std::size_t C = 2 + (i % 9);
    const auto z = random_logits(rng, C, -20.0, 20.0);
    const LossSpec spec{Variant::CRL, alpha_dist(rng), beta_dist(rng)};
    CHECK(losses::loss_forward(spec, z, i % C) > 0.0);
  }
  CHECK(losses::positivity_guaranteed({Variant::CRL, 1.0, 1.0}));
  CHECK(!losses::positivity_guaranteed({Variant::CRL, 0.5, 1.0}));
}

TEST_CASE("CRL decomposes into competing term minus log-likelihood") {
  std::mt19937_64 rng(45);
  for (std::size_t i = 0; i < 5000; ++i) {
    const std::size_t C = 2 + (i % 9);
    const auto z = random_logits(rng, C);
    const std::size_t label = i % C;
    const double alpha = 1.5, beta = 0.75;
    const auto p = losses::softmax(z);
    double s = 0.0;
    for (std::size_t k = 0; k < C; ++k)
      if (k != label) s += p[k];
    const double expect = beta * std::log(alpha + s) - std::log(p[label]);
    REQUIRE(losses::loss_forward({Variant::CRL, alpha, beta}, z, label) ==
            doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("losses are invariant to logit translation") {
  std::mt19937_64 rng(46);
  for (Variant v : {Variant::CEL, Variant::CCE, Variant::NLLR, Variant::CRL}) {
    for (std::size_t i = 0; i < 200; ++i) {
      const std::size_t C = 3 + (i % 8);
      auto z = random_logits(rng, C);
      const std::size_t label = i % C;
      const LossSpec spec{v, 1.5, 1.0};
      const double base = losses::loss_forward(spec, z, label);
      for (double& x : z) x += 7.25;
      REQUIRE(losses::loss_forward(spec, z, label) ==
              doctest::Approx(base).epsilon(1e-10));
    }
  }
}

TEST_CASE("CRL gradient multiplier never shrinks below the CEL gradient") {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> alpha_dist(0.1, 2.0);
  std::uniform_real_distribution<double> beta_dist(0.0, 1.25);
  for (std::size_t i = 0; i < 5000; ++i) {
    const std::size_t C = 2 + (i % 9);
    const auto z = random_logits(rng, C);
    const std::size_t label = i % C;
    const LossSpec crl{Variant::CRL, alpha_dist(rng), beta_dist(rng)};
    const auto gc = losses::loss_backward(crl, z, label);
    const auto ge = losses::loss_backward({Variant::CEL}, z, label);
    for (std::size_t j = 0; j < C; ++j)
      REQUIRE(std::fabs(gc[j]) >= std::fabs(ge[j]) - 1e-15);
  }
}

TEST_CASE("gradient rows sum to zero (softmax simplex constraint)") {
  std::mt19937_64 rng(48);
  for (Variant v : {Variant::CEL, Variant::CCE, Variant::NLLR, Variant::CRL}) {
    for (std::size_t i = 0; i < 500; ++i) {
      const std::size_t C = 2 + (i % 9);
      const auto z = random_logits(rng, C);
      const auto g = losses::loss_backward({v, 1.5, 1.0}, z, i % C);
      double sum = 0.0;
      for (double gj : g) sum += gj;
      REQUIRE(sum == doctest::Approx(0.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("spec validation rejects bad configurations") {
  CHECK_THROWS(LossSpec{Variant::BCE}.validate(3));
  CHECK_NOTHROW(LossSpec{Variant::BCE}.validate(2));
  CHECK_THROWS(LossSpec{Variant::CRL, -0.1, 1.0}.validate(5));
  CHECK_THROWS(LossSpec{Variant::CRL, 1.0, -0.1}.validate(5));
  CHECK_THROWS(losses::variant_from_name("XEL"));
  CHECK(losses::variant_from_name("CRL") == Variant::CRL);
  CHECK(losses::variant_name(Variant::NLLR) == "NLLR");
  std::vector<double> z{0.0, 1.0};
  CHECK_THROWS(losses::finite_diff_grad({Variant::CEL}, z, 0, 0.0));
}

TEST_CASE("gradient curve matches ratio-form and analytic oracles") {
  std::vector<LossSpec> family{{Variant::CEL},
                               {Variant::NLLR},
                               {Variant::CRL, 1.5, 1.0}};
  std::vector<double> grid{0.25, 0.5, 0.75};
  const auto samples = losses::gradient_curve(family, grid, 0.5);
  REQUIRE(samples.size() == 9);
  for (const auto& s : samples) {
    if (s.loss_label == "CEL") {
      // d/dz_j of -log p_c is p_j everywhere.
      CHECK(s.value_printed == doctest::Approx(0.5).epsilon(1e-15));
      CHECK(s.value_analytic == doctest::Approx(0.5).epsilon(1e-15));
    }
    if (s.loss_label == "NLLR" && s.p_c == 0.5)
      CHECK(s.value_printed == doctest::Approx(0.0).epsilon(1e-15));
    if (s.loss_label == "CRL" && s.p_c == 0.5) {
      CHECK(s.value_printed == doctest::Approx(0.375).epsilon(1e-15));
      CHECK(s.value_analytic == doctest::Approx(0.625).epsilon(1e-15));
    }
  }
  std::vector<LossSpec> bad{{Variant::BCE}};
  CHECK_THROWS(losses::gradient_curve(bad, grid, 0.5));
}

TEST_CASE("batch loss is the mean with 1/N-scaled gradients") {
  std::mt19937_64 rng(49);
  const std::size_t N = 7, C = 4;
  Tensor batch({N, C});
  std::vector<std::size_t> labels(N);
  for (double& v : batch.data) v = random_logits(rng, 1)[0];
  for (std::size_t i = 0; i < N; ++i) labels[i] = i % C;

  const LossSpec spec{Variant::CRL, 1.5, 1.0};
  const auto [mean, grads] = losses::batch_loss(spec, batch, labels);

  double expect = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    std::span<const double> row(&batch.data[i * C], C);
    expect += losses::loss_forward(spec, row, labels[i]);
    const auto g = losses::loss_backward(spec, row, labels[i]);
    for (std::size_t j = 0; j < C; ++j)
      REQUIRE(grads.data[i * C + j] ==
              doctest::Approx(g[j] / double(N)).epsilon(1e-15));
  }
  CHECK(mean == doctest::Approx(expect / double(N)).epsilon(1e-13));
}
