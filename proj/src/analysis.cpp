// SPDX-License-Identifier: Apache-2.0
#include "vpsde/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vpsde/errors.hpp"
#include "vpsde/parallel.hpp"
#include "vpsde/rng.hpp"

namespace vpsde {

namespace {

Eigen::VectorXd uniform_in_ball(Rng& rng, int dim, double R) {
  // Direction from normals, radius by inverse CDF of r^d.
  Eigen::VectorXd v(dim);
  double norm2 = 0.0;
  do {
    norm2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      v[i] = rng.normal();
      norm2 += v[i] * v[i];
    }
  } while (norm2 == 0.0);
  const double r = R * std::pow(rng.uniform(), 1.0 / dim);
  return v * (r / std::sqrt(norm2));
}

}  // namespace

OuPoint make_ou_point(double t, Eigen::VectorXd x, double R, double T) {
  if (!(t >= 0.0) || t > T) throw ContractViolation("OuPoint: t outside [0, T]");
  if (x.norm() > R + 1e-12) throw ContractViolation("OuPoint: ||x|| exceeds R");
  return OuPoint{t, std::move(x)};
}

double rho_ou(const OuPoint& a, const OuPoint& b) {
  return (std::exp(-a.t) * a.x - std::exp(-b.t) * b.x).norm() +
         std::sqrt(std::abs(a.t - b.t));
}

long verify_metric_axioms(int dim, double R, double T, std::int64_t trials, std::uint64_t seed) {
  if (trials < 10000) throw ContractViolation("verify_metric_axioms: trials must be >= 1e4");
  std::vector<long> counts(static_cast<std::size_t>((trials + 8191) / 8192), 0);
  parallel_for_index(static_cast<std::int64_t>(counts.size()), [&](std::int64_t batch) {
    Rng rng(derive_seed(seed, "metric", static_cast<std::uint64_t>(batch)));
    long bad = 0;
    const std::int64_t lo = batch * 8192;
    const std::int64_t hi = std::min<std::int64_t>(lo + 8192, trials);
    for (std::int64_t i = lo; i < hi; ++i) {
      OuPoint a{rng.uniform() * T, uniform_in_ball(rng, dim, R)};
      OuPoint b{rng.uniform() * T, uniform_in_ball(rng, dim, R)};
      OuPoint c{rng.uniform() * T, uniform_in_ball(rng, dim, R)};
      // symmetry
      if (std::abs(rho_ou(a, b) - rho_ou(b, a)) > 1e-12) ++bad;
      // identity of indiscernibles: rho(a,a) = 0 and a perturbed copy is
      // strictly separated
      if (rho_ou(a, a) != 0.0) ++bad;
      OuPoint ap = a;
      ap.x[0] += 1e-6 * R;
      if (!(rho_ou(a, ap) > 0.0)) ++bad;
      // triangle
      if (rho_ou(a, c) > rho_ou(a, b) + rho_ou(b, c) + 1e-12) ++bad;
    }
    counts[static_cast<std::size_t>(batch)] = bad;
  });
  long total = 0;
  for (long c : counts) total += c;
  return total;
}

L2LipschitzReport verify_l2_lipschitz_field(
    int dim, const std::function<double(const Eigen::VectorXd&)>& g, double lipschitz, int pairs,
    int mc_draws, std::uint64_t seed, double R, double T) {
  if (mc_draws < 10000) throw ContractViolation("verify_l2_lipschitz: mc_draws must be >= 1e4");
  if (pairs < 1) throw ContractViolation("verify_l2_lipschitz: pairs must be >= 1");

  // Shared z draws (common random numbers): the lemma compares both terminal
  // costs under the same Q.
  Rng zrng(derive_seed(seed, "l2z", 0));
  std::vector<Eigen::VectorXd> z(mc_draws);
  for (int i = 0; i < mc_draws; ++i) z[i] = zrng.normal_vec(dim);

  const double rhs_factor = lipschitz * (1.0 + std::sqrt(2.0 * dim));
  L2LipschitzReport rep;
  Rng prng(derive_seed(seed, "l2pairs", 0));
  Eigen::VectorXd arg_a(dim), arg_b(dim);
  for (int p = 0; p < pairs; ++p) {
    const OuPoint a{prng.uniform() * T, uniform_in_ball(prng, dim, R)};
    const OuPoint b{prng.uniform() * T, uniform_in_ball(prng, dim, R)};
    const double rho = rho_ou(a, b);
    if (rho < 1e-14) continue;  // coincident pair: both sides 0
    const double ea = std::exp(-a.t), eb = std::exp(-b.t);
    const double na = std::sqrt(-std::expm1(-2.0 * a.t));
    const double nb = std::sqrt(-std::expm1(-2.0 * b.t));
    double mean_sq = 0.0, mean_q4 = 0.0;
    for (int i = 0; i < mc_draws; ++i) {
      arg_a = ea * a.x + na * z[i];
      arg_b = eb * b.x + nb * z[i];
      const double d = g(arg_a) - g(arg_b);  // the -g(0) terms cancel
      mean_sq += d * d;
      mean_q4 += d * d * d * d;
    }
    mean_sq /= mc_draws;
    mean_q4 /= mc_draws;
    const double var_sq = std::max(0.0, mean_q4 - mean_sq * mean_sq);
    const double se_sq = std::sqrt(var_sq / mc_draws);
    const double lhs = std::sqrt(mean_sq);
    const double lhs_lo = std::sqrt(std::max(0.0, mean_sq - 3.0 * se_sq));
    const double rhs = rhs_factor * rho;
    rep.max_ratio = std::max(rep.max_ratio, lhs / rhs);
    if (lhs_lo > rhs) ++rep.violations;
  }
  return rep;
}

L2LipschitzReport verify_l2_lipschitz(const RadonNikodym& rnd, int pairs, int mc_draws,
                                      std::uint64_t seed, double R, double T) {
  return verify_l2_lipschitz_field(
      rnd.dim(), [&rnd](const Eigen::VectorXd& x) { return rnd.value(x); }, rnd.lipschitz(),
      pairs, mc_draws, seed, R, T);
}

long verify_envelope_field(int dim, const std::function<double(const Eigen::VectorXd&)>& g,
                           double lipschitz, double R, std::int64_t samples, std::uint64_t seed) {
  if (samples < 100000) throw ContractViolation("verify_envelope: samples must be >= 1e5");
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(dim);
  const double g0 = g(zero);
  const double r_or_one = std::max(R, 1.0);
  std::vector<long> counts(static_cast<std::size_t>((samples + 8191) / 8192), 0);
  parallel_for_index(static_cast<std::int64_t>(counts.size()), [&](std::int64_t batch) {
    Rng rng(derive_seed(seed, "envelope", static_cast<std::uint64_t>(batch)));
    long bad = 0;
    const std::int64_t lo = batch * 8192;
    const std::int64_t hi = std::min<std::int64_t>(lo + 8192, samples);
    Eigen::VectorXd z(dim), arg(dim);
    for (std::int64_t i = lo; i < hi; ++i) {
      const Eigen::VectorXd x = uniform_in_ball(rng, dim, R);
      const double t = rng.uniform();
      for (int j = 0; j < dim; ++j) z[j] = rng.normal();
      arg = std::exp(-t) * x + std::sqrt(-std::expm1(-2.0 * t)) * z;
      const double lhs = std::abs(g(arg) - g0);
      const double envelope = lipschitz * (r_or_one + std::sqrt(2.0) * z.norm());
      if (lhs > envelope + 1e-9) ++bad;
    }
    counts[static_cast<std::size_t>(batch)] = bad;
  });
  long total = 0;
  for (long c : counts) total += c;
  return total;
}

long verify_envelope(const RadonNikodym& rnd, double R, std::int64_t samples,
                     std::uint64_t seed) {
  return verify_envelope_field(
      rnd.dim(), [&rnd](const Eigen::VectorXd& x) { return rnd.value(x); }, rnd.lipschitz(), R,
      samples, seed);
}

double verify_commutation(const SemigroupEstimator& est, int probes, std::uint64_t seed, double R,
                          double fd_step) {
  if (probes < 10) throw ContractViolation("verify_commutation: probes must be >= 10");
  const int d = est.dim();
  Rng rng(derive_seed(seed, "commute", 0));
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const Eigen::VectorXd x = uniform_in_ball(rng, d, R);
    const double t = rng.uniform();
    const ValueGradStats s = est.ou_mc(x, t);
    const double denom = std::max(1.0, s.grad.cwiseAbs().maxCoeff());
    for (int i = 0; i < d; ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += fd_step;
      xm[i] -= fd_step;
      const double fd =
          (est.ou_mc(xp, t).value - est.ou_mc(xm, t).value) / (2.0 * fd_step);
      worst = std::max(worst, std::abs(fd - s.grad[i]) / denom);
    }
  }
  return worst;
}

GridSpec GridSpec::standard(int dim, double R, double t_max, int nx, int nt) {
  GridSpec g;
  g.radius = R;
  g.t_max = t_max;
  g.nx = nx;
  g.nt = nt;
  g.direction = Eigen::VectorXd::Zero(dim);
  g.direction[0] = 1.0;
  return g;
}

std::vector<double> GridSpec::radii() const {
  std::vector<double> out(nx);
  for (int i = 0; i < nx; ++i)
    out[i] = nx == 1 ? 0.0 : -radius + 2.0 * radius * i / (nx - 1);
  return out;
}

std::vector<double> GridSpec::times() const {
  std::vector<double> out(nt);
  for (int i = 0; i < nt; ++i) out[i] = nt == 1 ? 0.0 : t_max * i / (nt - 1);
  return out;
}

SupErrorReport sup_error_report(const SemigroupEstimator& est, const SemigroupOracle& oracle,
                                const GridSpec& grid) {
  SupErrorReport rep;
  rep.value_excess_5se = -std::numeric_limits<double>::infinity();
  for (double t : grid.times()) {
    for (double r : grid.radii()) {
      const Eigen::VectorXd x = r * grid.direction;
      const ValueGradStats s = est.ou_mc(x, t);
      const double u = oracle.value(x, t);
      const Eigen::VectorXd grad_u = u * oracle.log_grad(x, t);
      const double verr = std::abs(s.value - u);
      const double gerr = (s.grad - grad_u).norm();
      rep.sup_value_err = std::max(rep.sup_value_err, verr);
      rep.sup_grad_err = std::max(rep.sup_grad_err, gerr);
      rep.max_value_se = std::max(rep.max_value_se, s.value_se);
      rep.max_grad_se = std::max(rep.max_grad_se, s.grad_se.maxCoeff());
      rep.value_excess_5se =
          std::max(rep.value_excess_5se, verr - (5.0 * s.value_se + 1e-12));
    }
  }
  return rep;
}

DriftRegularityReport verify_drift_regularity(const RadonNikodym& rnd,
                                              const NoiseSchedule& schedule,
                                              const GridSpec& grid) {
  DriftRegularityReport rep;
  const double L = rnd.lipschitz();
  const double c = rnd.lower_bound();
  rep.norm_bound = L / c;
  rep.quotient_bound = L / c + L * L / (c * c);

  SemigroupOracle oracle(rnd, schedule);
  const auto radii = grid.radii();
  for (double t : grid.times()) {
    std::vector<Eigen::VectorXd> g(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
      const Eigen::VectorXd x = radii[i] * grid.direction;
      g[i] = oracle.log_grad(x, t);
      rep.max_norm = std::max(rep.max_norm, g[i].norm());
    }
    for (std::size_t i = 0; i < radii.size(); ++i) {
      for (std::size_t j = i + 1; j < radii.size(); ++j) {
        const double dist = std::abs(radii[i] - radii[j]);
        if (dist < 1e-12) continue;
        rep.max_quotient = std::max(rep.max_quotient, (g[i] - g[j]).norm() / dist);
      }
    }
  }
  rep.pass = rep.max_norm <= rep.norm_bound + 1e-6 &&
             rep.max_quotient <= rep.quotient_bound + 1e-6;
  return rep;
}

std::vector<LemmaReport> run_lemma_suite(const RadonNikodym& rnd, const NoiseSchedule& schedule,
                                         const SemigroupEstimator& est,
                                         const LemmaSuiteParams& params) {
  std::vector<LemmaReport> out;

  {
    LemmaReport r;
    r.name = "metric_axioms";
    r.claim = "rho_ou is a metric on [0,T] x B^d(R)";
    r.trials = params.metric_trials;
    r.violations = verify_metric_axioms(rnd.dim(), params.R, params.T_metric,
                                        params.metric_trials, derive_seed(params.seed, "suite", 1));
    r.max_residual = 0.0;
    r.pass = r.violations == 0;
    out.push_back(r);
  }
  {
    LemmaReport r;
    r.name = "l2_lipschitz";
    r.claim = "terminal cost is L(1+sqrt(2d))-Lipschitz in rho_ou under the L2(Q) norm";
    r.trials = params.l2_pairs;
    const auto rep = verify_l2_lipschitz(rnd, params.l2_pairs, params.l2_draws,
                                         derive_seed(params.seed, "suite", 2), params.R);
    r.violations = rep.violations;
    r.max_residual = rep.max_ratio;
    r.pass = rep.violations == 0;
    out.push_back(r);
  }
  {
    LemmaReport r;
    r.name = "envelope";
    r.claim = "centred terminal cost dominated by L((R v 1) + sqrt(2)||z||)";
    r.trials = params.envelope_samples;
    r.violations = verify_envelope(rnd, params.R, params.envelope_samples,
                                   derive_seed(params.seed, "suite", 3));
    r.max_residual = 0.0;
    r.pass = r.violations == 0;
    out.push_back(r);
  }
  {
    LemmaReport r;
    r.name = "commutation";
    r.claim = "semigroup commutes with the gradient (finite differences match analytic grad)";
    r.trials = params.commutation_probes;
    r.max_residual =
        verify_commutation(est, params.commutation_probes, derive_seed(params.seed, "suite", 4),
                           params.R);
    r.violations = r.max_residual < params.commutation_tol ? 0 : 1;
    r.pass = r.violations == 0;
    out.push_back(r);
  }
  {
    const auto grid = GridSpec::standard(rnd.dim(), params.R);
    const auto rep = verify_drift_regularity(rnd, schedule, grid);
    LemmaReport rn;
    rn.name = "drift_norm_bound";
    rn.claim = "||grad log U_t f|| <= L/c on the verification grid";
    rn.trials = static_cast<long>(grid.nx) * grid.nt;
    rn.max_residual = rep.max_norm;
    rn.violations = rep.max_norm <= rep.norm_bound + 1e-6 ? 0 : 1;
    rn.pass = rn.violations == 0;
    out.push_back(rn);

    LemmaReport rl;
    rl.name = "drift_lipschitz_bound";
    rl.claim = "grad log U_t f has difference quotients <= L/c + L^2/c^2";
    rl.trials = static_cast<long>(grid.nx) * grid.nt;
    rl.max_residual = rep.max_quotient;
    rl.violations = rep.max_quotient <= rep.quotient_bound + 1e-6 ? 0 : 1;
    rl.pass = rl.violations == 0;
    out.push_back(rl);
  }
  {
    // Clip bound of the estimator drift, checked on a coarse grid.
    LemmaReport r;
    r.name = "drift_clip_bound";
    r.claim = "clipped drift components within [-2L/c, 2L/c]";
    const auto grid = GridSpec::standard(rnd.dim(), params.R, 1.0, 7, 7);
    double worst = 0.0;
    for (double t : grid.times())
      for (double rad : grid.radii())
        worst = std::max(worst, est.drift(rad * grid.direction, t).cwiseAbs().maxCoeff());
    r.trials = static_cast<long>(grid.nx) * grid.nt;
    r.max_residual = worst;
    r.violations = worst <= est.clip_level() + 1e-12 ? 0 : 1;
    r.pass = r.violations == 0;
    out.push_back(r);
  }
  return out;
}

}  // namespace vpsde
