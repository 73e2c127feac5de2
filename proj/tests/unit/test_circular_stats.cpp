#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "colorser/circular_stats.hpp"
#include "colorser/error.hpp"

using namespace colorser::circular;

namespace {
const double kSigma0_90 = std::sqrt(std::log(2.0)) * 180.0 / kPi;  // sqrt(-2 ln(sqrt(2)/2)) in degrees
}

TEST_CASE("normalize_deg wraps into [0, 360)") {
  CHECK(normalize_deg(0.0) == 0.0);
  CHECK(normalize_deg(360.0) == 0.0);
  CHECK(normalize_deg(-10.0) == doctest::Approx(350.0).epsilon(1e-15));
  CHECK(normalize_deg(725.0) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(normalize_deg(-360.0) == 0.0);
  CHECK_THROWS_AS(normalize_deg(std::numeric_limits<double>::quiet_NaN()), colorser::DomainError);
}

TEST_CASE("circular mean of hand-checked lists") {
  CHECK(std::abs(circular_mean(std::vector<double>{350, 10})) < 1e-9);
  CHECK(circular_mean(std::vector<double>{0, 90}) == doctest::Approx(45.0).epsilon(1e-12));
  CHECK(circular_mean(std::vector<double>{46, 46, 46}) == doctest::Approx(46.0).epsilon(1e-12));
  CHECK(circular_mean(std::vector<double>{270, 90, 0}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("circular mean is undefined for balanced lists") {
  CHECK_THROWS_AS(circular_mean(std::vector<double>{0, 180}), colorser::UndefinedMeanError);
  CHECK_THROWS_AS(circular_mean(std::vector<double>{0, 120, 240}), colorser::UndefinedMeanError);
  CHECK_THROWS_AS(circular_mean(std::vector<double>{}), colorser::DomainError);
}

TEST_CASE("resultant length and circular std") {
  CHECK(mean_resultant_length(std::vector<double>{0, 90}) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
  CHECK(mean_resultant_length(std::vector<double>{5, 5}) == doctest::Approx(1.0));
  CHECK(circular_std(std::vector<double>{0, 0, 0}).deg == 0.0);
  CHECK(std::abs(circular_std(std::vector<double>{0, 90}).deg - kSigma0_90) < 1e-9);
  // 0.832555 rad, rounded.
  CHECK(std::abs(circular_std(std::vector<double>{0, 90}).deg * kRadPerDeg - 0.832555) < 5e-7);
  const CircularStd flat = circular_std(std::vector<double>{0, 180});
  CHECK(flat.infinite_dispersion);
  CHECK(std::isinf(flat.deg));
}

TEST_CASE("summarize agrees with the individual functions") {
  const std::vector<double> a{10, 20, 45, 350};
  const AngleSetSummary s = summarize(a);
  CHECK(s.n == 4);
  CHECK(s.mean_deg == doctest::Approx(circular_mean(a)).epsilon(1e-14));
  CHECK(s.resultant_length == doctest::Approx(mean_resultant_length(a)).epsilon(1e-14));
  CHECK(s.circ_std_deg == doctest::Approx(circular_std(a).deg).epsilon(1e-14));
}

TEST_CASE("angular error") {
  CHECK(angular_error(10, 350) == doctest::Approx(20.0));
  CHECK(angular_error(0, 180) == doctest::Approx(180.0));
  CHECK(angular_error(46, 48) == doctest::Approx(2.0));
  CHECK(angular_error(720, 0) == 0.0);
  CHECK(angular_error(30, 200) == angular_error(200, 30));
  CHECK_THROWS_AS(angular_error(std::numeric_limits<double>::infinity(), 0), colorser::DomainError);
}

TEST_CASE("hue components round trip") {
  auto [s0, c0] = hue_to_components(0);
  CHECK(s0 == doctest::Approx(0.0));
  CHECK(c0 == doctest::Approx(1.0));
  auto [s90, c90] = hue_to_components(90);
  CHECK(s90 == doctest::Approx(1.0));
  CHECK(std::abs(c90) < 1e-15);
  auto [s240, c240] = hue_to_components(240);
  CHECK(s240 == doctest::Approx(-std::sqrt(3.0) / 2).epsilon(1e-14));
  CHECK(c240 == doctest::Approx(-0.5).epsilon(1e-14));

  CHECK(components_to_hue(0, 1) == 0.0);
  CHECK(components_to_hue(1, 0) == doctest::Approx(90.0));
  CHECK(components_to_hue(-0.2, -0.2) == doctest::Approx(225.0).epsilon(1e-14));
  CHECK(components_to_hue(-1, -1) == doctest::Approx(225.0).epsilon(1e-14));
  CHECK_THROWS_AS(components_to_hue(0, 0), colorser::UndefinedAngleError);
  CHECK_THROWS_AS(components_to_hue(1e-14, -1e-14), colorser::UndefinedAngleError);

  for (double h = -720; h <= 720; h += 7.3) {
    auto [s, c] = hue_to_components(h);
    CHECK(angular_error(components_to_hue(s, c), normalize_deg(h)) < 1e-9);
  }
}
