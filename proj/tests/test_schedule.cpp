// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "vpsde/errors.hpp"
#include "vpsde/schedule.hpp"

using namespace vpsde;

namespace {

// Simpson quadrature of beta over [0, t]; independent route for the analytic
// integral.
double simpson_beta_integral(const NoiseSchedule& s, double t, int n = 2000) {
  double acc = 0.0;
  const double h = t / n;
  for (int i = 0; i < n; ++i) {
    const double a = i * h, b = (i + 1) * h;
    acc += (h / 6.0) * (s.beta(a) + 4.0 * s.beta(0.5 * (a + b)) + s.beta(b));
  }
  return acc;
}

}  // namespace

TEST_SUITE("schedule") {
  TEST_CASE("lambda at zero") {
    const auto s = NoiseSchedule::constant(1.0, 2.0);
    CHECK(s.lambda(0.0) == 0.0);
  }

  TEST_CASE("constant schedule closed form") {
    const auto s = NoiseSchedule::constant(1.0, 2.0);
    CHECK(s.lambda(std::log(2.0)) == doctest::Approx(0.75).epsilon(1e-14));
  }

  TEST_CASE("linear schedule matches quadrature") {
    const auto s = NoiseSchedule::linear(0.1, 1.0, 1.0);
    for (double t : {0.1, 0.3, 0.5, 0.9, 1.0}) {
      CHECK(s.beta_integral(t) == doctest::Approx(simpson_beta_integral(s, t)).epsilon(1e-10));
    }
    // int_0^1 beta = 0.55 for the ramp 0.1 -> 1.0
    CHECK(s.lambda(1.0) == doctest::Approx(1.0 - std::exp(-1.1)).epsilon(1e-12));
  }

  TEST_CASE("lambda stays in [0, 1)") {
    const auto s = NoiseSchedule::linear(0.5, 2.0, 4.0);
    for (double t : {0.0, 0.5, 1.0, 2.0, 4.0}) {
      const double l = s.lambda(t);
      CHECK(l >= 0.0);
      CHECK(l < 1.0);
    }
  }

  TEST_CASE("out of range t rejected") {
    const auto s = NoiseSchedule::constant(1.0, 1.0);
    CHECK_THROWS_AS(s.lambda(-0.1), ContractViolation);
    CHECK_THROWS_AS(s.lambda(1.5), ContractViolation);
  }

  TEST_CASE("invalid parameters rejected") {
    CHECK_THROWS_AS(NoiseSchedule::constant(-1.0, 1.0), ContractViolation);
    CHECK_THROWS_AS(NoiseSchedule::constant(1.0, 0.0), ContractViolation);
    CHECK_THROWS_AS(NoiseSchedule::linear(1.0, 0.5, 1.0), ContractViolation);
  }
}
