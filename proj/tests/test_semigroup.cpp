// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "vpsde/errors.hpp"
#include "vpsde/semigroup.hpp"

using namespace vpsde;
using test_util::vec1;
using test_util::vec2;

namespace {

SemigroupEstimator make_estimator(const GaussianMixture& target, double sigma, double ball,
                                  std::int64_t cloud_size, std::uint64_t seed,
                                  double clip = 0.0, double horizon = 4.0) {
  auto rnd = RadonNikodym::with_estimated_constants(target, sigma, ball, 2048, 5);
  return SemigroupEstimator(sample_cloud(target.dim(), cloud_size, seed), std::move(rnd),
                            NoiseSchedule::constant(1.0, horizon), clip);
}

}  // namespace

TEST_SUITE("semigroup") {
  TEST_CASE("cloud radius bound arithmetic and determinism") {
    const auto c1 = sample_cloud(2, 100, 7);
    CHECK(c1.radius_bound == doctest::Approx(8.0 * std::sqrt(8.0 * std::log(100.0))).epsilon(1e-12));
    CHECK(c1.radius_bound == doctest::Approx(48.558).epsilon(1e-3));
    CHECK(c1.attempts == 1);
    double max_norm = 0.0;
    for (Eigen::Index i = 0; i < c1.size(); ++i)
      max_norm = std::max(max_norm, c1.points.row(i).norm());
    CHECK(max_norm < 5.0);  // normal max-norm is tiny next to the bound

    const auto c2 = sample_cloud(2, 100, 7);
    CHECK((c1.points - c2.points).cwiseAbs().maxCoeff() == 0.0);
    const auto c3 = sample_cloud(2, 100, 8);
    CHECK((c1.points - c3.points).cwiseAbs().maxCoeff() > 0.0);
  }

  TEST_CASE("minimal cloud") {
    const auto c = sample_cloud(1, 2, 3);
    CHECK(c.size() == 2);
    CHECK(c.radius_bound == doctest::Approx(8.0 * std::sqrt(7.0 * std::log(2.0))).epsilon(1e-12));
    CHECK(c.radius_bound == doctest::Approx(17.622).epsilon(1e-3));
    CHECK_THROWS_AS(sample_cloud(1, 1, 3), ContractViolation);
  }

  TEST_CASE("constant ratio gives value one and zero gradient") {
    const auto est = make_estimator(GaussianMixture::standard(2), 1.0, 2.0, 500, 11);
    for (double t : {0.0, 0.4, 2.0}) {
      const auto s = est.ou_mc(vec2(0.3, -0.7), t);
      CHECK(s.value == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(s.grad.norm() < 1e-12);
    }
  }

  TEST_CASE("t = 0 collapses to an exact evaluation") {
    const auto target = GaussianMixture::isotropic(vec1(1.0), 1.0);
    const auto est = make_estimator(target, 1.0, 3.0, 100, 13);
    const Eigen::VectorXd x = vec1(0.4);
    const auto s = est.ou_mc(x, 0.0);
    const auto direct = est.ratio()(x);
    CHECK(s.value == doctest::Approx(direct.value).epsilon(1e-13));
    CHECK(s.grad[0] == doctest::Approx(direct.grad[0]).epsilon(1e-13));
    CHECK(s.value_se < 1e-6);  // pure rounding noise: all summands coincide
  }

  TEST_CASE("closed form for the exponential tilt within MC error") {
    // U_t f(x) = exp(e^{-t} m x - e^{-2t} m^2 / 2) for pi = N(m, 1), sigma = 1.
    const auto target = GaussianMixture::isotropic(vec1(1.0), 1.0);
    const auto est = make_estimator(target, 1.0, 6.0, 100000, 17);
    const double x = 0.5, t = 0.5;
    const double want = std::exp(std::exp(-t) * x - std::exp(-2.0 * t) / 2.0);
    const auto s = est.ou_mc(vec1(x), t);
    CHECK(std::abs(s.value - want) < 3.0 * s.value_se);
    // and the closed form itself agrees with the marginal-ratio oracle
    const double oracle = ou_semigroup_oracle(est.ratio(), est.schedule(), vec1(x), t);
    CHECK(oracle == doctest::Approx(want).epsilon(1e-12));
  }

  TEST_CASE("oracle value is one for the stationary target and mixes to one") {
    const double sigma = 1.4;
    const auto target = GaussianMixture::isotropic(Eigen::VectorXd::Zero(1), sigma * sigma);
    const auto rnd = RadonNikodym::with_estimated_constants(target, sigma, 2.0, 2048, 5);
    const auto schedule = NoiseSchedule::constant(1.0, 50.0);
    CHECK(ou_semigroup_oracle(rnd, schedule, vec1(0.7), 0.3) == doctest::Approx(1.0).epsilon(1e-12));

    const auto shifted = GaussianMixture::isotropic(vec1(2.0), 1.0);
    const auto rnd2 = RadonNikodym::with_estimated_constants(shifted, 1.0, 3.0, 2048, 5);
    CHECK(ou_semigroup_oracle(rnd2, schedule, vec1(0.7), 40.0) == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("MC semigroup agrees with the oracle over a 5x5 grid") {
    const auto target = test_util::bimodal(1, 1.0);
    const auto est = make_estimator(target, 1.0, 7.0, 1000000, 19);
    const SemigroupOracle oracle(est.ratio(), est.schedule());
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        const Eigen::VectorXd x = vec1(-1.0 + 0.5 * i);
        const double t = 0.05 + 0.95 * j / 4.0;
        const auto s = est.ou_mc(x, t);
        CHECK(std::abs(s.value - oracle.value(x, t)) < 5.0 * s.value_se + 1e-12);
      }
    }
  }

  TEST_CASE("general sigma keeps the oracle identity") {
    // The noise scale sigma enters the empirical semigroup argument; checked
    // against the closed-form marginal ratio at sigma = 2.
    const double sigma = 2.0;
    const auto target = GaussianMixture::isotropic(vec1(1.0), 1.0);
    const auto est = make_estimator(target, sigma, 8.0, 200000, 23);
    const SemigroupOracle oracle(est.ratio(), est.schedule());
    for (double t : {0.2, 0.7}) {
      for (double x : {-0.5, 0.5}) {
        const auto s = est.ou_mc(vec1(x), t);
        CHECK(std::abs(s.value - oracle.value(vec1(x), t)) < 5.0 * s.value_se + 1e-12);
      }
    }
  }

  TEST_CASE("parallel kernel matches the serial reference") {
    const auto target = test_util::bimodal(2, 1.0);
    const auto est = make_estimator(target, 1.0, 6.0, 30000, 29);
    for (double t : {0.0, 0.5, 1.5}) {
      const auto par = est.ou_mc(vec2(0.4, -0.2), t);
      const auto ser = est.ou_mc_reference(vec2(0.4, -0.2), t);
      CHECK(par.value == doctest::Approx(ser.value).epsilon(1e-12));
      CHECK((par.grad - ser.grad).cwiseAbs().maxCoeff() < 1e-12 * (1.0 + ser.grad.norm()));
      // the variance subtraction amplifies summation-order rounding
      CHECK(par.value_se == doctest::Approx(ser.value_se).epsilon(1e-6));
    }
  }

  TEST_CASE("heat semigroup basics") {
    const auto target = GaussianMixture::isotropic(vec1(1.0), 1.0);
    const auto rnd = RadonNikodym::with_estimated_constants(target, 1.0, 6.0, 2048, 5);
    const auto cloud = sample_cloud(1, 1000, 31);
    const Eigen::VectorXd x = vec1(0.3);
    const auto s0 = heat_semigroup_mc(rnd, cloud, x, 0.0);
    const auto direct = rnd(x);
    CHECK(s0.value == doctest::Approx(direct.value).epsilon(1e-13));
    CHECK(s0.grad[0] == doctest::Approx(direct.grad[0]).epsilon(1e-13));
  }

  TEST_CASE("heat semigroup second-moment identity via the generic kernel") {
    // Q_t f(x) = x^2 + t + 1 for f(x) = x^2 + 1.
    const auto cloud = sample_cloud(1, 100000, 37);
    const auto stats = detail::mc_kernel(cloud.points, 1.0, std::sqrt(1.0), vec1(1.0).data(),
                                         []() {
                                           return [](const double* arg, double& v, double* g) {
                                             v = arg[0] * arg[0] + 1.0;
                                             g[0] = 2.0 * arg[0];
                                           };
                                         });
    CHECK(std::abs(stats.value - 3.0) < 3.0 * stats.value_se);
  }

  TEST_CASE("drift of the trivial ratio is zero") {
    const auto est = make_estimator(GaussianMixture::standard(2), 1.0, 2.0, 500, 41);
    CHECK(est.drift(vec2(0.5, -0.5), 0.7).norm() < 1e-12);
  }

  TEST_CASE("drift matches the tilt rate e^{-t} m") {
    const auto target = GaussianMixture::isotropic(vec1(1.0), 1.0);
    const auto est = make_estimator(target, 1.0, 6.0, 100000, 43);
    for (double t : {0.1, 0.5, 1.5}) {
      for (double x : {-0.5, 0.8}) {
        const auto s = est.ou_mc(vec1(x), t);
        const double want = std::exp(-t);
        const double got = s.grad[0] / s.value;
        CHECK(std::abs(got - want) < 5.0 * s.ratio_se[0] + 1e-12);
      }
    }
  }

  TEST_CASE("clipping caps each component at the clip level") {
    const auto target = GaussianMixture::isotropic(vec1(5.0), 1.0);
    const auto est = make_estimator(target, 1.0, 2.0, 5000, 47, /*clip=*/3.0);
    const Eigen::VectorXd x = vec1(0.0);
    const double raw = est.drift_raw(x, 0.01)[0];
    CHECK(raw > 3.0);  // tilt rate is about 5 near t = 0
    CHECK(est.drift(x, 0.01)[0] == doctest::Approx(3.0));
  }

  TEST_CASE("default clip level is 2 L / c") {
    const auto target = GaussianMixture::isotropic(vec1(1.0), 1.0);
    auto rnd = RadonNikodym::with_estimated_constants(target, 1.0, 3.0, 2048, 5);
    const double L = rnd.lipschitz(), c = rnd.lower_bound();
    const SemigroupEstimator est(sample_cloud(1, 100, 53), std::move(rnd),
                                 NoiseSchedule::constant(1.0, 4.0));
    CHECK(est.clip_level() == doctest::Approx(2.0 * L / c).epsilon(1e-12));
  }

  TEST_CASE("score of the stationary target is -y / sigma^2") {
    const double sigma = 1.5;
    const auto target = GaussianMixture::isotropic(Eigen::VectorXd::Zero(1), sigma * sigma);
    const auto est = make_estimator(target, sigma, 2.0, 1000, 59);
    const Eigen::VectorXd y = vec1(0.9);
    CHECK(est.score(y, 0.8)[0] == doctest::Approx(-0.9 / (sigma * sigma)).epsilon(1e-10));
  }

  TEST_CASE("score matches the closed form for the shifted Gaussian") {
    const auto target = GaussianMixture::isotropic(vec1(1.0), 1.0);
    const auto est = make_estimator(target, 1.0, 6.0, 100000, 61);
    for (double t : {0.2, 1.0}) {
      for (double y : {-0.4, 0.9}) {
        const auto swe = est.score_with_se(vec1(y), t);
        const double want = -(y - std::exp(-t));
        CHECK(std::abs(swe.score[0] - want) < 5.0 * swe.se[0] + 1e-12);
      }
    }
  }

  TEST_CASE("score RMSE contracts at the Monte-Carlo rate") {
    // 16x more cloud points -> RMSE vs the oracle score shrinks ~4x. Needs a
    // genuine mixture: for a single Gaussian the ratio estimator is exact
    // (the exponential tilt factors out of the sum), so there is no MC error
    // to contract.
    const auto target = test_util::bimodal(1, 1.0);
    auto mse_at = [&](std::int64_t n, std::uint64_t seed) {
      const auto est = make_estimator(target, 1.0, 6.0, n, seed);
      const MarginalOracle oracle(target, est.schedule(), 1.0);
      double acc = 0.0;
      int cnt = 0;
      for (double t : {0.25, 0.5, 0.75, 1.0}) {
        for (double y : {-0.8, -0.3, 0.3, 0.8}) {
          const double diff = est.score(vec1(y), t)[0] - oracle.score(vec1(y), t)[0];
          acc += diff * diff;
          ++cnt;
        }
      }
      return acc / cnt;
    };
    // Errors across one grid share the cloud, so a single cloud has few
    // effective degrees of freedom; average the MSE over independent clouds.
    double mse_small = 0.0, mse_big = 0.0;
    for (std::uint64_t s = 0; s < 12; ++s) {
      mse_small += mse_at(1000, 100 + s);
      mse_big += mse_at(16000, 200 + s);
    }
    const double rmse_ratio = std::sqrt(mse_small / mse_big);
    CHECK(rmse_ratio > 2.0);
    CHECK(rmse_ratio < 8.0);
  }

  TEST_CASE("estimator construction validations") {
    auto rnd = RadonNikodym::with_estimated_constants(GaussianMixture::standard(2), 1.0, 2.0, 2048, 5);
    CHECK_THROWS_AS(SemigroupEstimator(sample_cloud(1, 100, 3), rnd,
                                       NoiseSchedule::constant(1.0, 4.0)),
                    ContractViolation);
    const auto est = make_estimator(GaussianMixture::standard(2), 1.0, 2.0, 100, 3);
    CHECK_THROWS_AS(est.ou_mc(vec2(0, 0), -0.5), ContractViolation);
    CHECK_THROWS_AS(est.ou_mc(vec1(0), 0.5), ContractViolation);
  }
}
