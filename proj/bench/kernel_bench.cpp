// SPDX-License-Identifier: Apache-2.0
//
// Wall-clock comparison of the OpenMP kernels against their serial reference
// implementations: the empirical-semigroup reduction and the particle
// integrator. Run manually: ./kernel_bench [cloud_size] [particles]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "vpsde/parallel.hpp"
#include "vpsde/radon_nikodym.hpp"
#include "vpsde/sde.hpp"
#include "vpsde/semigroup.hpp"

using namespace vpsde;
namespace chrono = std::chrono;

namespace {

double seconds_since(chrono::steady_clock::time_point t0) {
  return chrono::duration<double>(chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  const std::int64_t cloud_size = argc > 1 ? std::atoll(argv[1]) : 1000000;
  const std::int64_t particles = argc > 2 ? std::atoll(argv[2]) : 200000;

  const int d = 2;
  Eigen::VectorXd m(d);
  m << 1.0, 0.0;
  const auto target = GaussianMixture::isotropic(m, 1.0);
  const auto schedule = NoiseSchedule::constant(1.0, 4.0);
  auto rnd = RadonNikodym::with_estimated_constants(target, 1.0, 8.0, 4096, 7);
  SemigroupEstimator est(sample_cloud(d, cloud_size, 11), rnd, schedule);

  Eigen::VectorXd x(d);
  x << 0.5, -0.25;
  std::printf("threads available: %d\n", max_threads());

  // Semigroup reduction: parallel chunked kernel vs serial reference.
  {
    auto t0 = chrono::steady_clock::now();
    const auto par = est.ou_mc(x, 0.5);
    const double t_par = seconds_since(t0);
    t0 = chrono::steady_clock::now();
    const auto ser = est.ou_mc_reference(x, 0.5);
    const double t_ser = seconds_since(t0);
    std::printf("semigroup N=%lld: parallel %.3fs, serial %.3fs, speedup %.2fx, |dvalue| %.3e\n",
                static_cast<long long>(cloud_size), t_par, t_ser, t_ser / t_par,
                std::abs(par.value - ser.value));
  }

  // Particle integrator: OpenMP across particles (per-particle seeds make the
  // serial run bitwise identical, so only timing differs).
  {
    const auto drift = make_oracle_score_drift(target, schedule, 1.0);
    SimulateOptions opts;
    opts.n_steps = 50;
    opts.n_particles = particles;
    opts.seed = 99;
    const auto t0 = chrono::steady_clock::now();
    const auto result = simulate_reverse(schedule, 1.0, *drift, InitialCondition::reference(), opts);
    const double elapsed = seconds_since(t0);
    std::printf("sampler %lld particles x %d steps: %.3fs (%.1f Msteps/s), mean[0] %.4f\n",
                static_cast<long long>(particles), opts.n_steps, elapsed,
                particles * opts.n_steps / elapsed / 1e6, result.samples.col(0).mean());
  }
  return 0;
}
