#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles/qp_oracle.hpp"
#include "colorser/circular_stats.hpp"
#include "colorser/error.hpp"
#include "colorser/svr.hpp"

using namespace colorser;

namespace {

Matrix column(const std::vector<double>& xs) { return Matrix(xs.size(), 1, xs); }

std::vector<double> flat_kernel(const Matrix& k) { return {k.values().begin(), k.values().end()}; }

// Coefficients for every training row (zeros for non-support rows).
std::vector<double> full_coefficients(const svr::SvrModel& m, const Matrix& x) {
  std::vector<double> out(x.rows(), 0.0);
  for (std::size_t s = 0; s < m.support_vectors.rows(); ++s) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
      bool same = true;
      for (std::size_t d = 0; d < x.cols(); ++d) same = same && x(i, d) == m.support_vectors(s, d);
      if (same) {
        out[i] = m.dual_coefficients[s];
        break;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("temporal average pooling") {
  CHECK(svr::temporal_average_pooling(Matrix(2, 2, {1, 2, 3, 4})) == std::vector<double>{2, 3});
  CHECK(svr::temporal_average_pooling(Matrix(1, 3, {1, -2, 5})) == std::vector<double>{1, -2, 5});
  Matrix same(100, 2);
  for (std::size_t r = 0; r < 100; ++r) {
    same(r, 0) = 0.25;
    same(r, 1) = -7;
  }
  CHECK(svr::temporal_average_pooling(same) == std::vector<double>{0.25, -7});
  CHECK_THROWS_AS(svr::temporal_average_pooling(Matrix(0, 2)), DomainError);
}

TEST_CASE("config validation") {
  svr::SvrConfig c;
  c.c = 0;
  CHECK_THROWS_AS(svr::validate(c), ValidationError);
  c = {};
  c.epsilon = -1;
  CHECK_THROWS_AS(svr::validate(c), ValidationError);
  c = {};
  c.gamma = 0;
  CHECK_THROWS_AS(svr::validate(c), ValidationError);
}

TEST_CASE("two-point instance has a closed form") {
  // K = [[1, k], [k, 1]], y = (1, -1): beta = (b, -b) with b = (1 - eps) / (1 - k), clipped to C.
  const Matrix x = column({0.0, 1.0});
  const double gamma = 0.5, eps = 0.1, k = std::exp(-gamma);
  for (double c : {0.5, 10.0}) {
    svr::SvrConfig cfg{c, eps, gamma, 0, 1e-9};
    const auto m = svr::train_svr(x, std::vector<double>{1, -1}, cfg);
    const double b = std::min(c, (1 - eps) / (1 - k));
    const auto coef = full_coefficients(m, x);
    CHECK(coef[0] == doctest::Approx(b).epsilon(1e-7));
    CHECK(coef[1] == doctest::Approx(-b).epsilon(1e-7));
    CHECK(m.solver.converged);
  }
}

TEST_CASE("constant targets stay inside the tube") {
  const Matrix x = column({0, 0.2, 0.4, 0.6, 0.8, 1.0});
  const auto m = svr::train_svr(x, std::vector<double>(6, 0.7), {1.0, 0.1, 1.0});
  for (std::size_t i = 0; i < x.rows(); ++i) CHECK(std::abs(svr::predict_svr(m, x.row(i)) - 0.7) <= 0.1 + 1e-9);
}

TEST_CASE("a line is fit within twice the tube") {
  std::vector<double> xs, ys;
  for (int i = 0; i < 20; ++i) {
    xs.push_back(i / 19.0);
    ys.push_back(2 * xs.back());
  }
  const Matrix x = column(xs);
  const auto m = svr::train_svr(x, ys, {100.0, 0.01, 1.0});
  CHECK(m.solver.converged);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::abs(svr::predict_svr(m, x.row(i)) - ys[i]) <= 0.02);
}

TEST_CASE("five-point instance matches the projected-gradient oracle") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> u(-1, 1);
  Matrix x(5, 2);
  for (double& v : x.values()) v = u(gen);
  std::vector<double> y(5);
  for (double& v : y) v = u(gen);
  const svr::SvrConfig cfg{2.0, 0.05, 1.5};
  const auto m = svr::train_svr(x, y, cfg);
  const auto k = svr::kernel_matrix(x, cfg.gamma);
  const auto ref = oracle::solve_svr_dual(flat_kernel(k), y, cfg.c, cfg.epsilon);
  const auto coef = full_coefficients(m, x);
  CHECK(std::abs(svr::dual_objective(k, y, cfg.epsilon, coef) - ref.objective) < 1e-4);
  CHECK(std::abs(m.solver.dual_objective - svr::dual_objective(k, y, cfg.epsilon, coef)) < 1e-9);
  double sum = 0;
  for (double c : coef) {
    CHECK(std::abs(c) <= cfg.c + 1e-8);
    sum += c;
  }
  CHECK(std::abs(sum) < 1e-8);
}

TEST_CASE("prediction limits") {
  svr::SvrModel zero;
  zero.support_vectors = Matrix(1, 2, {0, 0});
  zero.dual_coefficients = {0.0};
  zero.bias = 0.3;
  zero.config.gamma = 1;
  CHECK(svr::predict_svr(zero, std::vector<double>{5, 5}) == 0.3);
  CHECK_THROWS_AS(svr::predict_svr(zero, std::vector<double>{1}), ValidationError);

  svr::SvrModel sharp = zero;
  sharp.dual_coefficients = {2.0};
  sharp.config.gamma = 1e3;
  CHECK(svr::predict_svr(sharp, std::vector<double>{3, 4}) == doctest::Approx(0.3));
  CHECK(svr::predict_svr(sharp, std::vector<double>{0, 0}) == doctest::Approx(2.3));
}

TEST_CASE("hue pair reconstruction") {
  svr::HueSvrPair pair;
  for (auto* m : {&pair.sin_model, &pair.cos_model}) {
    m->support_vectors = Matrix(1, 1, {0});
    m->dual_coefficients = {0.0};
    m->config.gamma = 1;
  }
  pair.sin_model.bias = 0.0;
  pair.cos_model.bias = 1.0;
  CHECK(svr::predict_hue(pair, std::vector<double>{0}) == 0.0);
  pair.sin_model.bias = 0.5;
  pair.cos_model.bias = 0.5;
  CHECK(svr::predict_hue(pair, std::vector<double>{0}) == doctest::Approx(45.0));
  pair.sin_model.bias = 0.05;
  pair.cos_model.bias = 0.05;
  CHECK(svr::predict_hue(pair, std::vector<double>{0}) == doctest::Approx(45.0));
  pair.sin_model.bias = 0.0;
  pair.cos_model.bias = 0.0;
  CHECK_THROWS_AS(svr::predict_hue(pair, std::vector<double>{0}), UndefinedAngleError);
  CHECK_FALSE(svr::predict_hue(pair, Matrix(1, 1, {0}))[0].has_value());
}

TEST_CASE("hue pair learns a circular target") {
  std::vector<double> xs, hues;
  for (int i = 0; i < 24; ++i) {
    xs.push_back(i / 23.0);
    hues.push_back(circular::normalize_deg(300 + 120 * xs.back()));
  }
  const Matrix x = column(xs);
  const auto pair = svr::train_hue_pair(x, hues, {10.0, 0.01, 5.0});
  const auto pred = svr::predict_hue(pair, x);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(circular::angular_error(*pred[i], hues[i]) < 5.0);
}

TEST_CASE("grid search") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> n(0, 1);
  Matrix tx(40, 2), vx(20, 2);
  for (double& v : tx.values()) v = n(gen);
  for (double& v : vx.values()) v = n(gen);
  std::vector<double> ty, vy;
  for (std::size_t i = 0; i < tx.rows(); ++i) ty.push_back(std::sin(tx(i, 0)) + 0.5 * tx(i, 1));
  for (std::size_t i = 0; i < vx.rows(); ++i) vy.push_back(std::sin(vx(i, 0)) + 0.5 * vx(i, 1));

  const svr::SvrGrid one{{1.0}, {0.1}, {0.5}};
  const auto single = svr::grid_search(tx, ty, vx, vy, one);
  CHECK(single.best.c == 1.0);
  CHECK(single.entries.size() == 1);

  // Duplicate points tie; the earlier one wins.
  const svr::SvrGrid dup{{1.0, 1.0}, {0.1}, {0.5}};
  const auto tie = svr::grid_search(tx, ty, vx, vy, dup);
  CHECK(tie.entries[0].score == tie.entries[1].score);
  CHECK(tie.best == tie.entries[0].config);

  // The winner scores at least as well as every other point.
  const auto full = svr::grid_search(tx, ty, vx, vy, svr::default_grid(2));
  CHECK(full.entries.size() == 24);
  for (const auto& e : full.entries) {
    if (e.score) CHECK(*e.score <= full.best_score);
  }
  CHECK(svr::expand_grid(svr::default_grid(4), {}).front().gamma == doctest::Approx(0.25));
}

TEST_CASE("grid search reports universal non-convergence") {
  Matrix x = column({0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7});
  std::vector<double> y{0, 1, 0, 1, 0, 1, 0, 1};
  svr::SvrConfig base;
  base.max_passes = 1;
  base.tolerance = 1e-12;
  CHECK_THROWS_AS(svr::grid_search(x, y, x, y, {{100.0}, {0.0}, {50.0}}, base), ConvergenceError);
}

TEST_CASE("model JSON round trip preserves predictions") {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> n(0, 1);
  Matrix x(15, 3);
  for (double& v : x.values()) v = n(gen);
  std::vector<double> y;
  for (std::size_t i = 0; i < x.rows(); ++i) y.push_back(x(i, 0) - x(i, 2));
  auto m = svr::train_svr(x, y, {3.0, 0.05, 0.3});
  m.scaler = svr::FeatureScaler::fit(x);
  const auto back = svr::svr_model_from_json(nlohmann::json::parse(svr::to_json(m).dump()));
  for (std::size_t i = 0; i < x.rows(); ++i) {
    CHECK(std::abs(svr::predict_svr(back, x.row(i)) - svr::predict_svr(m, x.row(i))) < 1e-12);
  }
  CHECK_THROWS_AS(svr::svr_model_from_json(nlohmann::json{{"format", "other"}}), ValidationError);
}

TEST_CASE("non-finite training data is rejected") {
  CHECK_THROWS_AS(svr::train_svr(column({0, NAN}), std::vector<double>{1, 2}, {}), ValidationError);
  CHECK_THROWS_AS(svr::train_svr(column({0}), std::vector<double>{1}, {}), ValidationError);
}
