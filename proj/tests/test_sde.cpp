// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "test_util.hpp"
#include "vpsde/errors.hpp"
#include "vpsde/sde.hpp"

using namespace vpsde;
using test_util::vec1;
using test_util::vec2;

namespace {

struct Moments {
  double mean, var;
};

Moments column_moments(const RowMajorMatrix& samples, int col) {
  const double n = static_cast<double>(samples.rows());
  const double mean = samples.col(col).mean();
  const double var = (samples.col(col).array() - mean).square().sum() / (n - 1.0);
  return {mean, var};
}

}  // namespace

TEST_SUITE("sde") {
  TEST_CASE("forward sample at t = 0 returns the initial point") {
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    const Eigen::VectorXd x0 = vec2(1.5, -0.5);
    CHECK((forward_sample(schedule, 1.0, x0, 0.0, 9) - x0).norm() == 0.0);
  }

  TEST_CASE("forward moments match the transition kernel") {
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    const std::int64_t n = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double x = forward_sample(schedule, 1.0, vec1(2.0), 1.0,
                                      derive_seed(3, "fm", static_cast<std::uint64_t>(i)))[0];
      sum += x;
      sum_sq += x * x;
    }
    const double mean = sum / n;
    const double var = (sum_sq - n * mean * mean) / (n - 1);
    const double want_mean = 2.0 * std::exp(-1.0);
    const double want_var = -std::expm1(-2.0);
    CHECK(std::abs(mean - want_mean) < 4.0 * std::sqrt(want_var / n));
    CHECK(std::abs(var - want_var) < 4.0 * want_var * std::sqrt(2.0 / n));
  }

  TEST_CASE("forward sampling is deterministic in the seed") {
    const auto schedule = NoiseSchedule::constant(1.0, 2.0);
    const Eigen::VectorXd a = forward_sample(schedule, 1.0, vec1(1.0), 0.7, 42);
    const Eigen::VectorXd b = forward_sample(schedule, 1.0, vec1(1.0), 0.7, 42);
    const Eigen::VectorXd c = forward_sample(schedule, 1.0, vec1(1.0), 0.7, 43);
    CHECK(a[0] == b[0]);
    CHECK(a[0] != c[0]);
  }

  TEST_CASE("reference drift is the contraction -beta y") {
    const auto schedule = NoiseSchedule::linear(0.5, 2.0, 2.0);
    const auto drift = make_reference_drift(schedule, 2);
    const Eigen::VectorXd y = vec2(1.0, -2.0);
    const double t_rev = 0.75;
    const double beta = schedule.beta(2.0 - t_rev);
    CHECK(((*drift)(y, t_rev) + beta * y).norm() < 1e-14);
  }

  TEST_CASE("oracle drift of the stationary target coincides with the reference") {
    const auto target = GaussianMixture::standard(1);
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    const auto oracle = make_oracle_score_drift(target, schedule, 1.0);
    const auto reference = make_reference_drift(schedule, 1);
    for (double t : {0.0, 1.3, 3.9}) {
      for (double y : {-2.0, 0.5}) {
        CHECK((*oracle)(vec1(y), t)[0] ==
              doctest::Approx((*reference)(vec1(y), t)[0]).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("oracle drift closed form for the shifted Gaussian") {
    // b(y, t_rev) = -y + 2 e^{-(T - t_rev)} m for pi = N(m, 1), sigma = beta = 1.
    const double m = 1.5, T = 4.0;
    const auto target = GaussianMixture::isotropic(vec1(m), 1.0);
    const auto schedule = NoiseSchedule::constant(1.0, T);
    const auto drift = make_oracle_score_drift(target, schedule, 1.0);
    for (double t_rev : {0.0, 1.0, 3.5}) {
      for (double y : {-0.7, 0.0, 2.0}) {
        const double want = -y + 2.0 * std::exp(-(T - t_rev)) * m;
        CHECK((*drift)(vec1(y), t_rev)[0] == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("score form and value-function form of the drift agree") {
    const auto target = test_util::bimodal(2, 1.0);
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    const auto score_form = make_oracle_score_drift(target, schedule, 1.0);
    const auto value_form = make_value_function_drift(target, schedule, 1.0);
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::VectorXd y = vec2(2.0 * rng.normal(), 2.0 * rng.normal());
      const double t = 4.0 * rng.uniform();
      const Eigen::VectorXd a = (*score_form)(y, t);
      const Eigen::VectorXd b = (*value_form)(y, t);
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + a.norm()));
    }
  }

  TEST_CASE("stationary target stays stationary under the oracle drift") {
    const double sigma = 1.0;
    const auto target = GaussianMixture::standard(1);
    const auto schedule = NoiseSchedule::constant(1.0, 2.0);
    const auto drift = make_oracle_score_drift(target, schedule, sigma);
    SimulateOptions opts;
    opts.n_steps = 100;
    opts.n_particles = 20000;
    opts.seed = 5;
    const auto result =
        simulate_reverse(schedule, sigma, *drift, InitialCondition::reference(), opts);
    const auto m = column_moments(result.samples, 0);
    const double se_mean = 1.0 / std::sqrt(20000.0);
    const double se_var = std::sqrt(2.0 / 20000.0);
    CHECK(std::abs(m.mean) < 4.0 * se_mean + 0.01);   // O(dt) bias allowance
    CHECK(std::abs(m.var - 1.0) < 4.0 * se_var + 0.02);
  }

  TEST_CASE("reference process is invariant at every recorded step") {
    const double sigma = 1.3;
    const auto schedule = NoiseSchedule::constant(1.0, 2.0);
    const auto drift = make_reference_drift(schedule, 1);
    SimulateOptions opts;
    opts.n_steps = 50;
    opts.n_particles = 5000;
    opts.seed = 21;
    opts.record_paths = true;
    const auto result =
        simulate_reverse(schedule, sigma, *drift, InitialCondition::reference(), opts);
    for (int step : {10, 25, 50}) {
      double sum = 0.0, sum_sq = 0.0;
      for (const auto& traj : result.paths) {
        const double x = traj.states[static_cast<std::size_t>(step)][0];
        sum += x;
        sum_sq += x * x;
      }
      const double n = static_cast<double>(result.paths.size());
      const double mean = sum / n;
      const double var = (sum_sq - n * mean * mean) / (n - 1);
      const double want = sigma * sigma;
      CHECK(std::abs(mean) < 5.0 * sigma / std::sqrt(n) + 0.02);
      CHECK(std::abs(var - want) < 5.0 * want * std::sqrt(2.0 / n) + 0.03);
    }
  }

  TEST_CASE("trajectory bookkeeping") {
    const auto schedule = NoiseSchedule::constant(1.0, 2.0);
    const auto drift = make_reference_drift(schedule, 1);
    SimulateOptions opts;
    opts.n_steps = 25;
    opts.n_particles = 3;
    opts.seed = 8;
    opts.record_paths = true;
    const auto result =
        simulate_reverse(schedule, 1.0, *drift, InitialCondition::reference(), opts);
    REQUIRE(result.paths.size() == 3);
    for (const auto& traj : result.paths) {
      CHECK(traj.times.size() == 26);
      CHECK(traj.states.size() == 26);
      CHECK(traj.times.front() == 0.0);
      CHECK(traj.times.back() == 2.0);
      for (std::size_t k = 1; k < traj.times.size(); ++k) CHECK(traj.times[k] > traj.times[k - 1]);
    }
  }

  TEST_CASE("exact reversal recovers the target") {
    const auto target = GaussianMixture::isotropic(vec1(2.0), 1.0);
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    const auto drift = make_oracle_score_drift(target, schedule, 1.0);
    SimulateOptions opts;
    opts.n_steps = 200;
    opts.n_particles = 20000;
    opts.seed = 33;
    const auto result =
        simulate_reverse(schedule, 1.0, *drift, InitialCondition::exact_pt(target), opts);
    const auto m = column_moments(result.samples, 0);
    const double se_mean = 1.0 / std::sqrt(20000.0);
    // dt = 0.02: mean bias about dt/2
    CHECK(std::abs(m.mean - 2.0) < 4.0 * se_mean + 0.02);
    CHECK(std::abs(m.var - 1.0) < 4.0 * std::sqrt(2.0 / 20000.0) + 0.03);
  }

  TEST_CASE("terminal-moment bias halves when the step count doubles") {
    const auto target = GaussianMixture::isotropic(vec1(2.0), 1.0);
    const auto schedule = NoiseSchedule::constant(1.0, 4.0);
    const auto drift = make_oracle_score_drift(target, schedule, 1.0);
    auto bias_at = [&](int n_steps) {
      SimulateOptions opts;
      opts.n_steps = n_steps;
      opts.n_particles = 200000;
      opts.seed = 55;
      const auto result =
          simulate_reverse(schedule, 1.0, *drift, InitialCondition::exact_pt(target), opts);
      return std::abs(column_moments(result.samples, 0).mean - 2.0);
    };
    const double coarse = bias_at(50);
    const double fine = bias_at(100);
    CHECK(fine / coarse > 0.35);
    CHECK(fine / coarse < 0.65);
  }

  TEST_CASE("identical inputs give bitwise-identical samples") {
    const auto target = GaussianMixture::isotropic(vec1(1.0), 1.0);
    const auto schedule = NoiseSchedule::constant(1.0, 2.0);
    const auto drift = make_oracle_score_drift(target, schedule, 1.0);
    SimulateOptions opts;
    opts.n_steps = 20;
    opts.n_particles = 64;
    opts.seed = 77;
    const auto a = simulate_reverse(schedule, 1.0, *drift, InitialCondition::reference(), opts);
    const auto b = simulate_reverse(schedule, 1.0, *drift, InitialCondition::reference(), opts);
    CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("divergent dynamics raise an error naming the step") {
    const auto schedule = NoiseSchedule::constant(1.0, 1.0);
    const auto blow_up = make_custom_drift(1, [](const Eigen::VectorXd& y, double) {
      return Eigen::VectorXd::Constant(1, 1e200 * (1.0 + y.norm()));
    });
    SimulateOptions opts;
    opts.n_steps = 10;
    opts.n_particles = 2;
    opts.seed = 1;
    try {
      simulate_reverse(schedule, 1.0, *blow_up, InitialCondition::reference(), opts);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
  }

  TEST_CASE("option validation") {
    const auto schedule = NoiseSchedule::constant(1.0, 1.0);
    const auto drift = make_reference_drift(schedule, 1);
    SimulateOptions opts;
    opts.n_steps = 5;  // below the minimum
    opts.n_particles = 1;
    CHECK_THROWS_AS(simulate_reverse(schedule, 1.0, *drift, InitialCondition::reference(), opts),
                    ContractViolation);
    opts.n_steps = 10;
    InitialCondition bad;
    bad.kind = InitKind::ExactPT;
    CHECK_THROWS_AS(simulate_reverse(schedule, 1.0, *drift, bad, opts), ContractViolation);
  }
}
