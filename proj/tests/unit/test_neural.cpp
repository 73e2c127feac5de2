#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles/finite_diff.hpp"
#include "colorser/error.hpp"
#include "colorser/neural.hpp"

using namespace colorser;
using namespace colorser::neural;

namespace {

MlpShape small_shape() {
  MlpShape s;
  s.input = 5;
  s.trunk = {7, 4};
  s.regression_hidden = 3;
  return s;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& gen, double sd = 1.0) {
  std::normal_distribution<double> n(0, sd);
  Matrix m(r, c);
  for (double& v : m.values()) v = n(gen);
  return m;
}

Dataset linear_dataset(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0, 1);
  Dataset d;
  d.features = Matrix(n, 4);
  d.targets = Matrix(n, kRegressionOutputs);
  for (std::size_t i = 0; i < n; ++i) {
    const double hue = 360 * u(gen), s = u(gen), v = u(gen);
    const auto t = regression_target({hue, s, v});
    for (std::size_t k = 0; k < 4; ++k) d.targets(i, k) = t[k];
    d.features(i, 0) = t[0];
    d.features(i, 1) = t[1];
    d.features(i, 2) = 2 * s - 1;
    d.features(i, 3) = 2 * v - 1;
    d.labels.push_back(static_cast<int>(i % kEmotionCount));
  }
  return d;
}

}  // namespace

TEST_CASE("initialization is seeded") {
  CHECK(init_params(small_shape(), 3) == init_params(small_shape(), 3));
  CHECK_FALSE(init_params(small_shape(), 3) == init_params(small_shape(), 4));
  MlpShape bad = small_shape();
  bad.trunk = {7, 0};
  CHECK_THROWS_AS(init_params(bad, 1), ValidationError);
  bad = small_shape();
  bad.input = 0;
  CHECK_THROWS_AS(init_params(bad, 1), ValidationError);
}

TEST_CASE("forward shapes and degenerate cases") {
  std::mt19937_64 gen(1);
  const MlpParams p = init_params(small_shape(), 9);
  const auto out = forward(p, random_matrix(6, 5, gen));
  CHECK(out.regression.rows() == 6);
  CHECK(out.regression.cols() == 4);
  CHECK(out.logits.cols() == 6);

  const MlpParams z = p.zeros_like();
  const auto zo = forward(z, random_matrix(3, 5, gen));
  for (double v : zo.regression.values()) CHECK(v == 0.0);
  for (double v : zo.logits.values()) CHECK(v == 0.0);

  Matrix dup(4, 5);
  const Matrix one = random_matrix(1, 5, gen);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 5; ++c) dup(r, c) = one(0, c);
  const auto d = forward(p, dup);
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(d.regression(r, c) == d.regression(0, c));

  CHECK_THROWS_AS(forward(p, Matrix(2, 4)), ValidationError);
}

TEST_CASE("batch ccc loss") {
  const Matrix t(3, 4, {0, 1, 2, 3, 1, 2, 3, 4, 2, 3, 4, 6});
  CHECK(batch_ccc_loss(t, t) == 0.0);
  Matrix p = t;
  for (std::size_t r = 0; r < 3; ++r) p(r, 3) = 5;
  CHECK(batch_ccc_loss(p, t) == doctest::Approx(0.25));
  const Matrix a(3, 1, {0, 1, 2}), b(3, 1, {1, 2, 3});
  CHECK(std::abs(batch_ccc_loss(b, a) - 3.0 / 7.0) < 1e-12);
  CHECK_THROWS_AS(batch_ccc_loss(Matrix(1, 4), Matrix(1, 4)), DomainError);
  const bool only_last[] = {false, false, false, true};
  CHECK(batch_ccc_loss(p, t, only_last) == doctest::Approx(1.0));

  // Common row permutation.
  std::mt19937_64 gen(4);
  const Matrix x = random_matrix(8, 4, gen), y = random_matrix(8, 4, gen);
  Matrix xp(8, 4), yp(8, 4);
  const std::size_t perm[] = {3, 1, 7, 0, 2, 6, 5, 4};
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 4; ++c) {
      xp(r, c) = x(perm[r], c);
      yp(r, c) = y(perm[r], c);
    }
  CHECK(batch_ccc_loss(xp, yp) == doctest::Approx(batch_ccc_loss(x, y)).epsilon(1e-13));
}

TEST_CASE("cross entropy") {
  const Matrix uniform(2, 6);
  CHECK(cross_entropy(uniform, std::vector<int>{0, 5}) == doctest::Approx(std::log(6.0)));
  Matrix l(1, 6);
  l(0, 1) = std::log(3.0);
  CHECK(cross_entropy(l, std::vector<int>{1}) == doctest::Approx(-std::log(3.0 / 8.0)).epsilon(1e-14));
  double previous = 1e9;
  for (double margin : {0.0, 1.0, 5.0, 50.0, 500.0}) {
    Matrix m(1, 6);
    m(0, 2) = margin;
    const double ce = cross_entropy(m, std::vector<int>{2});
    CHECK(ce <= previous);
    CHECK(std::isfinite(ce));
    previous = ce;
  }
  CHECK_THROWS_AS(cross_entropy(uniform, std::vector<int>{0, 6}), ValidationError);
}

TEST_CASE("multitask loss endpoints and linearity") {
  std::mt19937_64 gen(8);
  const Matrix rp = random_matrix(5, 4, gen), rt = random_matrix(5, 4, gen), lg = random_matrix(5, 6, gen);
  const std::vector<int> labels{0, 1, 2, 3, 4};
  const double ccc = batch_ccc_loss(rp, rt), ce = cross_entropy(lg, labels);
  CHECK(multitask_loss(rp, rt, lg, labels, 1.0) == ce);
  CHECK(multitask_loss(rp, rt, lg, labels, 0.0) == ccc);
  CHECK(multitask_loss(rp, rt, lg, labels, 0.9) == doctest::Approx(0.1 * ccc + 0.9 * ce).epsilon(1e-15));
  CHECK_THROWS_AS(multitask_loss(rp, rt, lg, labels, 1.5), ValidationError);
  // The regression term is not evaluated at alpha = 1.
  CHECK(multitask_loss(Matrix(1, 4), Matrix(1, 4), Matrix(1, 6), std::vector<int>{0}, 1.0) ==
        doctest::Approx(std::log(6.0)));
}

TEST_CASE("backward matches finite differences") {
  std::mt19937_64 gen(12);
  for (double alpha : {0.0, 0.5, 1.0}) {
    const MlpParams p = init_params(small_shape(), 100 + static_cast<std::uint64_t>(alpha * 10));
    const Matrix x = random_matrix(6, 5, gen), t = random_matrix(6, 4, gen);
    const std::vector<int> labels{0, 3, 5, 1, 1, 2};
    const auto lg = backward(p, x, t, labels, alpha);
    const auto loss = [&](const MlpParams& q) {
      const auto out = forward(q, x);
      return multitask_loss(out.regression, t, out.logits, labels, alpha);
    };
    CHECK(lg.loss == doctest::Approx(loss(p)).epsilon(1e-13));
    const auto check = oracle::check_gradients(p, lg.gradients, loss);
    CAPTURE(alpha);
    CAPTURE(check.worst);
    CHECK(check.failures == 0);
  }
}

TEST_CASE("gradient endpoints") {
  std::mt19937_64 gen(13);
  const MlpParams p = init_params(small_shape(), 5);
  const Matrix x = random_matrix(4, 5, gen), t = random_matrix(4, 4, gen);
  const std::vector<int> labels{2, 2, 0, 4};
  const auto g1 = backward(p, x, t, labels, 1.0);
  for (const auto& layer : g1.gradients.regression_head) {
    for (double v : layer.weight) CHECK(v == 0.0);
    for (double v : layer.bias) CHECK(v == 0.0);
  }
  const auto g0 = backward(p, x, t, labels, 0.0);
  for (double v : g0.gradients.classification_head.weight) CHECK(v == 0.0);

  // Averaged CE: duplicating the batch leaves the classification gradient unchanged.
  Matrix one(1, 5), two(2, 5);
  for (std::size_t c = 0; c < 5; ++c) one(0, c) = two(0, c) = two(1, c) = x(0, c);
  const auto a = classification_backward(p, one, std::vector<int>{3});
  const auto b = classification_backward(p, two, std::vector<int>{3, 3});
  for (std::size_t i = 0; i < a.gradients.classification_head.weight.size(); ++i) {
    CHECK(a.gradients.classification_head.weight[i] ==
          doctest::Approx(b.gradients.classification_head.weight[i]).epsilon(1e-14));
  }
}

TEST_CASE("adamw") {
  MlpParams p = init_params(small_shape(), 2);
  const MlpParams original = p;
  AdamWState state = AdamWState::for_params(p);
  AdamWConfig cfg;
  cfg.weight_decay = 0;
  cfg.learning_rate = 0.1;
  cfg.total_steps = 10;
  adamw_step(p, p.zeros_like(), state, 1, cfg);
  CHECK(p == original);

  cfg.weight_decay = 0.5;
  adamw_step(p, p.zeros_like(), state, 2, cfg);
  const double factor = 1 - linear_schedule(0.1, 2, 10) * 0.5;
  CHECK(p.trunk[0].weight[0] == doctest::Approx(original.trunk[0].weight[0] * factor).epsilon(1e-15));

  CHECK(linear_schedule(0.1, 10, 10) == 0.0);
  CHECK(linear_schedule(0.1, 1, 10) == doctest::Approx(0.09));
  CHECK_THROWS_AS(adamw_step(p, p.zeros_like(), state, 0, cfg), ValidationError);
  MlpParams other = init_params(MlpShape{3, {2}, 2}, 1);
  CHECK_THROWS_AS(adamw_step(p, other, state, 3, cfg), ValidationError);
}

TEST_CASE("training is deterministic and learns a linear map") {
  const Dataset train_set = linear_dataset(96, 1), val_set = linear_dataset(48, 2);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.learning_rate = 3e-3;
  cfg.trunk = {32, 16};
  cfg.regression_hidden = 16;
  cfg.seed = 6;
  const auto a = train(train_set, &val_set, cfg);
  const auto b = train(train_set, &val_set, cfg);
  CHECK(a.params == b.params);
  REQUIRE(a.history.size() == 40);
  for (std::size_t e = 0; e < a.history.size(); ++e) CHECK(a.history[e].train_loss == b.history[e].train_loss);
  const auto scores = evaluate(a.params, val_set, cfg);
  CHECK(*scores.sat_ccc >= 0.9);
  CHECK(*scores.val_ccc >= 0.9);
  CHECK(a.best_epoch >= 1);

  cfg.alpha = 1.0;
  cfg.epochs = 2;
  const auto cls = train(train_set, &val_set, cfg);
  for (const auto& h : cls.history) {
    CHECK(h.validation->accuracy.has_value());
    CHECK_FALSE(h.validation->sat_ccc.has_value());
    CHECK_FALSE(h.validation->regression_loss.has_value());
  }
}

TEST_CASE("train config validation") {
  const Dataset d = linear_dataset(8, 1);
  TrainConfig cfg;
  cfg.batch_size = 1;
  CHECK_THROWS_AS(train(d, nullptr, cfg), ValidationError);
  cfg = {};
  cfg.alpha = -0.1;
  CHECK_THROWS_AS(train(d, nullptr, cfg), ValidationError);
  cfg = {};
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(d, nullptr, cfg), ValidationError);
  cfg = {};
  CHECK_THROWS_AS(train(Dataset{}, nullptr, cfg), ValidationError);
}

TEST_CASE("predict colors from raw head outputs") {
  MlpParams p = init_params(MlpShape{3, {4}, 2}, 1).zeros_like();
  p.regression_head[1].bias = {0.0, 1.0, 0.5, 0.9};
  p.classification_head.bias = {0, 0, 0, 2, 1, 0};
  const auto out = predict_colors(p, Matrix(1, 3));
  REQUIRE(out[0].hue_deg.has_value());
  CHECK(*out[0].hue_deg == 0.0);
  CHECK(out[0].saturation == 0.5);
  CHECK(out[0].value == 0.9);
  CHECK(out[0].emotion == Emotion::Hap);

  p.regression_head[1].bias = {0.0, 0.0, 1.3, -0.2};
  const auto flat = predict_colors(p, Matrix(1, 3));
  CHECK_FALSE(flat[0].hue_deg.has_value());
  CHECK(flat[0].saturation == 1.0);
  CHECK(flat[0].value == 0.0);
}

TEST_CASE("checkpoint JSON round trip") {
  std::mt19937_64 gen(3);
  const MlpParams p = init_params(small_shape(), 77);
  const MlpParams back = mlp_params_from_json(nlohmann::json::parse(to_json(p).dump()));
  CHECK(back == p);
  const Matrix x = random_matrix(3, 5, gen);
  CHECK(forward(back, x).regression == forward(p, x).regression);
  auto broken = to_json(p);
  broken["trunk"][1]["in"] = 99;
  CHECK_THROWS_AS(mlp_params_from_json(broken), ValidationError);
}
