#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "crl/models.hpp"

using namespace crl;
using models::LayerSpec;
using models::Model;

namespace {

Tensor random_input(std::vector<std::size_t> shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.data) v = normal(rng);
  return t;
}

}  // namespace

TEST_CASE("presets produce [N, C] logits") {
  {
    Model m = models::build_model("logreg", {784}, 10, 1);
    Tensor out = m.forward(random_input({3, 784}, 2));
    CHECK(out.shape == std::vector<std::size_t>{3, 10});
  }
  {
    Model m = models::build_model("mlp", {784}, 10, 1);
    Tensor out = m.forward(random_input({2, 784}, 3));
    CHECK(out.shape == std::vector<std::size_t>{2, 10});
  }
  {
    Model m = models::build_model("shallow_cnn", {1, 28, 28}, 10, 1);
    Tensor out = m.forward(random_input({2, 1, 28, 28}, 4));
    CHECK(out.shape == std::vector<std::size_t>{2, 10});
  }
  CHECK_THROWS(models::build_model("resnet", {784}, 10, 1));
}

TEST_CASE("construction rejects shape mismatches") {
  // Final layer width must equal the class count.
  CHECK_THROWS(Model({LayerSpec::linear(6, 4)}, {6}, 5, 1));
  // Linear input width must match the incoming shape.
  CHECK_THROWS(Model({LayerSpec::linear(7, 4)}, {6}, 4, 1));
  // Conv needs a [C, H, W] input.
  CHECK_THROWS(Model({LayerSpec::conv2d(1, 2, 3), LayerSpec::flatten(),
                      LayerSpec::linear(2, 2)},
                     {9}, 2, 1));
  CHECK_THROWS(Model({LayerSpec::dropout(1.5), LayerSpec::linear(4, 2)}, {4},
                     2, 1));
}

TEST_CASE("same seed gives bitwise identical parameters and outputs") {
  Model a = models::build_model("mlp", {64}, 5, 99);
  Model b = models::build_model("mlp", {64}, 5, 99);
  const auto pa = a.params(), pb = b.params();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i)
    REQUIRE(pa[i]->data == pb[i]->data);

  Tensor x = random_input({4, 64}, 7);
  CHECK(a.forward(x).data == b.forward(x).data);

  Model c = models::build_model("mlp", {64}, 5, 100);
  CHECK(c.params()[0]->data != pa[0]->data);
}

TEST_CASE("inverted dropout keeps the expected activation scale") {
  const std::size_t dim = 400, n = 250;
  Model m({LayerSpec::dropout(0.5)}, {dim}, dim, 1);
  m.train_mode();
  Tensor ones({n, dim});
  for (double& v : ones.data) v = 1.0;
  Tensor out = m.forward(ones);

  double sum = 0.0;
  std::size_t zeros = 0;
  for (double v : out.data) {
    CHECK((v == 0.0 || v == 2.0));
    sum += v;
    if (v == 0.0) ++zeros;
  }
  const double total = double(n * dim);
  CHECK(sum / total == doctest::Approx(1.0).epsilon(0.01));
  CHECK(double(zeros) / total == doctest::Approx(0.5).epsilon(0.02));

  // Eval mode is the identity.
  m.eval_mode();
  Tensor pass = m.forward(ones);
  CHECK(pass.data == ones.data);
}

TEST_CASE("predict breaks logit ties toward the lowest class index") {
  Model m({LayerSpec::linear(3, 4)}, {3}, 4, 1);
  for (auto* p : m.params())
    for (double& v : p->data) v = 0.0;
  Tensor x = random_input({5, 3}, 8);
  const auto preds = m.predict(x);
  for (std::size_t p : preds) CHECK(p == 0);
}

TEST_CASE("mode and ordering guards") {
  Model m = models::build_model("logreg", {6}, 3, 1);
  Tensor x = random_input({2, 6}, 9);
  m.train_mode();
  CHECK_THROWS_AS(m.predict(x), std::logic_error);
  // Backward without a cached train-mode forward.
  Model fresh = models::build_model("logreg", {6}, 3, 1);
  Tensor g({2, 3});
  CHECK_THROWS_AS(fresh.backward(g), std::logic_error);
}

TEST_CASE("gradients accumulate and zero_grads clears them") {
  Model m = models::build_model("logreg", {4}, 3, 1);
  Tensor x = random_input({2, 4}, 10);
  Tensor g({2, 3});
  for (double& v : g.data) v = 0.5;

  m.train_mode();
  m.forward(x);
  m.backward(g);
  const auto first = m.grads()[0]->data;
  m.forward(x);
  m.backward(g);
  for (std::size_t i = 0; i < first.size(); ++i)
    CHECK(m.grads()[0]->data[i] == doctest::Approx(2.0 * first[i]));
  CHECK(m.grads_ready());
  m.zero_grads();
  for (double v : m.grads()[0]->data) CHECK(v == 0.0);
}

TEST_CASE("checkpoint round-trips bitwise") {
  namespace fs = std::filesystem;
  const fs::path path =
      fs::temp_directory_path() / "crl_ckpt_roundtrip_test.bin";

  Model m = models::build_model("mlp", {32}, 4, 77);
  models::save_checkpoint(m, path);
  Model r = models::load_checkpoint(path);

  CHECK(r.input_shape() == m.input_shape());
  CHECK(r.class_count() == m.class_count());
  const auto pm = m.params(), pr = r.params();
  REQUIRE(pm.size() == pr.size());
  for (std::size_t i = 0; i < pm.size(); ++i)
    REQUIRE(pm[i]->data == pr[i]->data);

  Tensor x = random_input({3, 32}, 11);
  CHECK(m.predict(x) == r.predict(x));
  fs::remove(path);

  CHECK_THROWS(models::load_checkpoint(path / "missing.bin"));
}
