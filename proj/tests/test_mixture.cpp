// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "vpsde/errors.hpp"
#include "vpsde/mixture.hpp"
#include "vpsde/sde.hpp"

using namespace vpsde;
using test_util::vec1;
using test_util::vec2;

namespace {

double normal_pdf(double x, double m, double var) {
  return std::exp(-0.5 * (x - m) * (x - m) / var) / std::sqrt(2.0 * M_PI * var);
}

}  // namespace

TEST_SUITE("mixture") {
  TEST_CASE("standard normal log density at the mode") {
    const auto gmm = GaussianMixture::standard(1);
    CHECK(gmm.log_density(vec1(0.0)) == doctest::Approx(-0.9189385332046727).epsilon(1e-14));
  }

  TEST_CASE("log density decays monotonically in the tail") {
    const auto gmm = GaussianMixture::standard(1);
    double prev = gmm.log_density(vec1(1.0));
    for (double x = 2.0; x < 40.0; x += 1.0) {
      const double cur = gmm.log_density(vec1(x));
      CHECK(cur < prev);
      prev = cur;
    }
  }

  TEST_CASE("bimodal density at the midpoint matches direct summation") {
    const auto gmm = test_util::bimodal(1, 2.0);
    const double direct = std::log(0.5 * normal_pdf(0.0, -2.0, 1.0) + 0.5 * normal_pdf(0.0, 2.0, 1.0));
    CHECK(gmm.log_density(vec1(0.0)) == doctest::Approx(direct).epsilon(1e-13));
    CHECK(gmm.log_density(vec1(0.0)) == doctest::Approx(-2.9189385332046727).epsilon(1e-13));
  }

  TEST_CASE("dimension mismatch is a contract violation") {
    const auto gmm = GaussianMixture::standard(2);
    CHECK_THROWS_AS(gmm.log_density(vec1(0.0)), ContractViolation);
    CHECK_THROWS_AS(gmm.score(vec1(0.0)), ContractViolation);
  }

  TEST_CASE("construction invariants") {
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(1, 1);
    // weights must sum to one
    CHECK_THROWS_AS(GaussianMixture(1, {{0.6, vec1(0), eye}, {0.3, vec1(1), eye}}),
                    ContractViolation);
    // degenerate weight rejected
    CHECK_THROWS_AS(GaussianMixture(1, {{1e-13, vec1(0), eye}, {1.0 - 1e-13, vec1(1), eye}}),
                    ContractViolation);
    // non-SPD covariance rejected by the factorization
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(GaussianMixture(2, {{1.0, vec2(0, 0), bad}}), ContractViolation);
    // asymmetric covariance rejected
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS_AS(GaussianMixture(2, {{1.0, vec2(0, 0), asym}}), ContractViolation);
  }

  TEST_CASE("marginal at t = 0 is the identity") {
    const auto gmm = test_util::bimodal(2, 1.0);
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    const auto m0 = gmm.marginal_at(schedule, 1.0, 0.0);
    for (int k = 0; k < 2; ++k) {
      CHECK((m0.components()[k].mean - gmm.components()[k].mean).norm() == 0.0);
      CHECK((m0.components()[k].cov - gmm.components()[k].cov).norm() == 0.0);
    }
  }

  TEST_CASE("marginal approaches the stationary Gaussian") {
    const auto gmm = GaussianMixture::isotropic(vec1(3.0), 2.0);
    const double sigma = 1.5;
    const auto schedule = NoiseSchedule::constant(1.0, 100.0);
    const auto mT = gmm.marginal_at(schedule, sigma, 50.0);
    CHECK(mT.components()[0].mean.norm() < 1e-20);
    CHECK(mT.components()[0].cov(0, 0) == doctest::Approx(sigma * sigma).epsilon(1e-12));
  }

  TEST_CASE("marginal closed form at t = ln 2 for a unit Gaussian") {
    // beta = 1, sigma = 1: lambda = 0.75, mean shrinks to m/2, cov stays I.
    const auto gmm = GaussianMixture::isotropic(vec1(1.0), 1.0);
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    const auto mt = gmm.marginal_at(schedule, 1.0, std::log(2.0));
    CHECK(mt.components()[0].mean[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mt.components()[0].cov(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("pushforward matches exact forward simulation moments") {
    const auto gmm = test_util::bimodal(1, 1.0);
    const double sigma = 1.0;
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    const std::int64_t n = 10000;
    for (double t : {0.25, 0.5, 1.0, 2.0}) {
      const auto marginal = gmm.marginal_at(schedule, sigma, t);
      Rng pick(derive_seed(42, "pushforward", static_cast<std::uint64_t>(t * 100)));
      double sum = 0.0, sum_sq = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        const Eigen::VectorXd x0 = gmm.sample(pick);
        const Eigen::VectorXd xt =
            forward_sample(schedule, sigma, x0, t, derive_seed(7, "fwd", static_cast<std::uint64_t>(i)));
        sum += xt[0];
        sum_sq += xt[0] * xt[0];
      }
      const double mean = sum / n;
      const double var = (sum_sq - n * mean * mean) / (n - 1);
      const double want_mean = marginal.mean()[0];
      const double want_var = marginal.covariance()(0, 0);
      const double se_mean = std::sqrt(want_var / n);
      const double se_var = want_var * std::sqrt(2.0 / n);
      CHECK(std::abs(mean - want_mean) < 4.0 * se_mean);
      CHECK(std::abs(var - want_var) < 4.0 * se_var);
    }
  }

  TEST_CASE("score of the stationary target is -y / sigma^2") {
    const double sigma = 2.0;
    const auto gmm = GaussianMixture::isotropic(Eigen::VectorXd::Zero(2), sigma * sigma);
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    for (double t : {0.0, 0.3, 1.7}) {
      const Eigen::VectorXd y = vec2(0.7, -1.2);
      const Eigen::VectorXd s = oracle_score(gmm, schedule, sigma, t, y);
      CHECK((s + y / (sigma * sigma)).norm() < 1e-12);
    }
  }

  TEST_CASE("score closed form for a shifted unit Gaussian") {
    // p_t = N(e^{-t} m, I) when S = sigma = beta = 1: score = -(y - e^{-t} m).
    const double m = 1.0;
    const auto gmm = GaussianMixture::isotropic(vec1(m), 1.0);
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    for (double t : {0.1, 0.5, 2.0}) {
      for (double y : {-1.0, 0.0, 1.5}) {
        const double want = -(y - std::exp(-t) * m);
        const Eigen::VectorXd s = oracle_score(gmm, schedule, 1.0, t, vec1(y));
        CHECK(s[0] == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("score matches finite differences of the log marginal density") {
    const auto gmm = test_util::bimodal(2, 1.0);
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    Rng rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
      const double t = 2.0 * rng.uniform();
      const Eigen::VectorXd y = vec2(2.0 * rng.normal(), 2.0 * rng.normal());
      const auto marginal = gmm.marginal_at(schedule, 1.0, t);
      const Eigen::VectorXd want = test_util::fd_gradient(
          [&](const Eigen::VectorXd& p) { return marginal.log_density(p); }, y);
      const Eigen::VectorXd got = marginal.score(y);
      CHECK(test_util::max_rel_err(got, want) < 1e-5);
    }
  }

  TEST_CASE("score is a gradient field: symmetric Jacobian in d = 2") {
    const auto gmm = test_util::bimodal(2, 1.0);
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    const auto marginal = gmm.marginal_at(schedule, 1.0, 0.5);
    const double h = 1e-5;
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd y = vec2(rng.normal(), rng.normal());
      Eigen::MatrixXd jac(2, 2);
      for (int j = 0; j < 2; ++j) {
        Eigen::VectorXd yp = y, ym = y;
        yp[j] += h;
        ym[j] -= h;
        jac.col(j) = (marginal.score(yp) - marginal.score(ym)) / (2.0 * h);
      }
      CHECK(std::abs(jac(0, 1) - jac(1, 0)) < 1e-4);
    }
  }

  TEST_CASE("mixture moments") {
    const auto gmm = test_util::bimodal(1, 2.0);
    CHECK(gmm.mean()[0] == doctest::Approx(0.0));
    // var = E[x^2] = 1 + 4
    CHECK(gmm.covariance()(0, 0) == doctest::Approx(5.0).epsilon(1e-12));
  }
}
