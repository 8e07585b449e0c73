#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "varsr/quadrature.hpp"

using namespace varsr;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("polynomial is exact") {
  const auto r = integrate([](double x) { return x * x; }, 0.0, 1.0, 1e-12);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("standard normal mass over a wide window") {
  auto density = [](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
  };
  const auto r = integrate(density, -10.0, 10.0, 1e-12);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("narrow peak inside a wide window is resolved") {
  // normal with sigma 0.5 centered near the edge of a [-120, 120] window
  auto density = [](double x) {
    const double z = (x - 0.37) / 0.5;
    return std::exp(-0.5 * z * z) / (0.5 * std::sqrt(2.0 * kPi));
  };
  const auto r = integrate(density, -120.0, 120.0, 1e-10, 0.0, 24);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("oscillatory integrand") {
  const auto r = integrate([](double x) { return std::sin(x); }, 0.0, kPi, 1e-12);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("halving the tolerance moves the estimate by less than the coarser one") {
  auto f = [](double x) { return std::exp(-x) * std::cos(10.0 * x); };
  double prev = integrate(f, 0.0, 5.0, 1e-4).value;
  for (double tol = 5e-5; tol > 1e-10; tol *= 0.5) {
    const double next = integrate(f, 0.0, 5.0, tol).value;
    CHECK(std::abs(next - prev) <= 2.0 * tol * std::abs(next) + 1e-15);
    prev = next;
  }
}

TEST_CASE("panel budget exhaustion is reported") {
  // discontinuous integrand keeps error estimates alive
  auto f = [](double x) { return x < 0.123456789 ? 0.0 : 1.0; };
  const auto r = integrate(f, 0.0, 1.0, 1e-15, 0.0, 1, 8);
  CHECK_FALSE(r.converged);
}

TEST_CASE("invalid bounds throw") {
  CHECK_THROWS(integrate([](double) { return 1.0; }, 1.0, 0.0, 1e-6));
}
