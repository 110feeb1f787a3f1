// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vpsde/covering.hpp"
#include "vpsde/radon_nikodym.hpp"
#include "vpsde/schedule.hpp"
#include "vpsde/semigroup.hpp"

namespace vpsde {

// A point of the time-space domain [0,T] x B^d(R).
struct OuPoint {
  double t = 0.0;
  Eigen::VectorXd x;
};

// Validates membership in [0,T] x B^d(R) (||x|| <= R + 1e-12).
OuPoint make_ou_point(double t, Eigen::VectorXd x, double R, double T);

// rho_OU((t,x), (t',x')) = ||e^{-t} x - e^{-t'} x'|| + |t - t'|^{1/2}.
double rho_ou(const OuPoint& a, const OuPoint& b);

// Samples random triples from [0,T] x B^d(R) and checks symmetry, identity of
// indiscernibles (via perturbation) and the triangle inequality with 1e-12
// slack. Returns the violation count (expected 0).
long verify_metric_axioms(int dim, double R, double T, std::int64_t trials, std::uint64_t seed);

struct L2LipschitzReport {
  double max_ratio = 0.0;  // max over pairs of lhs / rhs
  long violations = 0;     // pairs where lhs exceeds rhs beyond 3 MC SE
};

// Checks || g_bar_{t,x} - g_bar_{t',x'} ||_{L2(Q)} <= L (1 + sqrt(2d)) rho_OU
// for random pairs, estimating the L2(Q) norm over shared standard-normal
// draws (common random numbers). The generic-field variant exists for tests
// with analytically known fields.
L2LipschitzReport verify_l2_lipschitz(const RadonNikodym& rnd, int pairs, int mc_draws,
                                      std::uint64_t seed, double R = 1.0, double T = 1.0);
L2LipschitzReport verify_l2_lipschitz_field(
    int dim, const std::function<double(const Eigen::VectorXd&)>& g, double lipschitz, int pairs,
    int mc_draws, std::uint64_t seed, double R = 1.0, double T = 1.0);

// Checks |f(e^{-t}x + sqrt(1-e^{-2t}) z) - f(0)| <= L ((R v 1) + sqrt(2)||z||)
// over random (x, t, z); violations counted beyond 1e-9 slack.
long verify_envelope(const RadonNikodym& rnd, double R, std::int64_t samples, std::uint64_t seed);
long verify_envelope_field(int dim, const std::function<double(const Eigen::VectorXd&)>& g,
                           double lipschitz, double R, std::int64_t samples, std::uint64_t seed);

// Central finite differences of the empirical semigroup value against its
// analytic gradient (same cloud on both sides). Returns the max relative
// residual over random probes in B(R) x [0,1].
double verify_commutation(const SemigroupEstimator& est, int probes, std::uint64_t seed,
                          double R = 1.0, double fd_step = 1e-5);

// (x, t) verification grid: x = r * direction for r in linspace(-R, R, nx),
// t in linspace(0, t_max, nt). direction defaults to e_1.
struct GridSpec {
  double radius = 1.0;
  double t_max = 1.0;
  int nx = 21;
  int nt = 21;
  Eigen::VectorXd direction;

  static GridSpec standard(int dim, double R = 1.0, double t_max = 1.0, int nx = 21, int nt = 21);
  std::vector<double> radii() const;
  std::vector<double> times() const;
};

struct SupErrorReport {
  double sup_value_err = 0.0;   // sup |phi_hat - U_t f|
  double sup_grad_err = 0.0;    // sup ||grad phi_hat - grad U_t f||
  double max_value_se = 0.0;    // largest pointwise MC SE of the value
  double max_grad_se = 0.0;
  // max over grid of |value err| - (5 * pointwise SE + 1e-12); <= 0 means the
  // empirical semigroup agrees with the oracle within Monte-Carlo resolution.
  double value_excess_5se = 0.0;
};

SupErrorReport sup_error_report(const SemigroupEstimator& est, const SemigroupOracle& oracle,
                                const GridSpec& grid);

struct DriftRegularityReport {
  double max_norm = 0.0;        // sup ||grad log U_t f|| over the grid
  double norm_bound = 0.0;      // L / c
  double max_quotient = 0.0;    // max difference quotient over same-t pairs
  double quotient_bound = 0.0;  // L/c + L^2/c^2
  bool pass = false;
};

// Checks the boundedness and Lipschitz bounds of the oracle log-gradient of
// the semigroup over the verification grid.
DriftRegularityReport verify_drift_regularity(const RadonNikodym& rnd,
                                              const NoiseSchedule& schedule, const GridSpec& grid);

struct LemmaReport {
  std::string name;
  std::string claim;
  long trials = 0;
  long violations = 0;
  double max_residual = 0.0;
  bool pass = false;
};

struct LemmaSuiteParams {
  std::int64_t metric_trials = 100000;
  int l2_pairs = 200;
  int l2_draws = 10000;
  std::int64_t envelope_samples = 1000000;
  int commutation_probes = 50;
  double commutation_tol = 1e-6;
  double R = 1.0;
  double T_metric = 1.0;
  std::uint64_t seed = 0;
};

// Runs every lemma-level verifier plus the drift regularity and clip bounds;
// one report entry per check. `est` supplies the cloud for the commutation and
// clip checks.
std::vector<LemmaReport> run_lemma_suite(const RadonNikodym& rnd, const NoiseSchedule& schedule,
                                         const SemigroupEstimator& est,
                                         const LemmaSuiteParams& params);

}  // namespace vpsde
