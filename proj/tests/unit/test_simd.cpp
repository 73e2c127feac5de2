#include <doctest.h>

#include <random>
#include <vector>

#include "colorser/error.hpp"
#include "colorser/simd.hpp"

using namespace colorser;

TEST_CASE("every available backend matches the scalar kernels") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0, 1);
  const auto& ref = simd::kernels_for(simd::Backend::scalar);
  for (simd::Backend b : simd::available_backends()) {
    CAPTURE(simd::backend_name(b));
    const auto& k = simd::kernels_for(b);
    for (std::size_t len : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 33u, 257u}) {
      std::vector<double> x(len), y(len);
      for (auto& v : x) v = n(gen);
      for (auto& v : y) v = n(gen);
      CHECK(k.dot(x.data(), y.data(), len) == doctest::Approx(ref.dot(x.data(), y.data(), len)).epsilon(1e-12));
      CHECK(k.squared_distance(x.data(), y.data(), len) ==
            doctest::Approx(ref.squared_distance(x.data(), y.data(), len)).epsilon(1e-12));
      std::vector<double> y1 = y, y2 = y;
      k.axpy(0.37, x.data(), y1.data(), len);
      ref.axpy(0.37, x.data(), y2.data(), len);
      for (std::size_t i = 0; i < len; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("backend override and span wrappers") {
  const simd::Backend before = simd::active_backend();
  simd::set_backend(simd::Backend::scalar);
  CHECK(simd::active_backend() == simd::Backend::scalar);
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(simd::dot(a, b) == 32.0);
  CHECK(simd::squared_distance(a, b) == 27.0);
  std::vector<double> y{1, 1, 1};
  simd::axpy(2.0, a, y);
  CHECK(y == std::vector<double>{3, 5, 7});
  CHECK_THROWS_AS(simd::dot(a, std::vector<double>{1}), ValidationError);
  simd::set_backend(before);
}
