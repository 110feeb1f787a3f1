// SPDX-License-Identifier: Apache-2.0
#include "vpsde/divergence.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>

#include "vpsde/errors.hpp"
#include "vpsde/parallel.hpp"
#include "vpsde/rng.hpp"

namespace vpsde {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

struct PathStats {
  double sum = 0.0, sum_sq = 0.0;
  std::int64_t n = 0;
};

KlEstimate finalize(const PathStats& st) {
  KlEstimate e;
  e.n_paths = st.n;
  e.estimate = st.sum / st.n;
  if (st.n > 1) {
    const double var =
        std::max(0.0, (st.sum_sq - st.n * e.estimate * e.estimate) / (st.n - 1.0));
    e.std_error = std::sqrt(var / st.n);
  }
  return e;
}

// Per-path accumulation with deterministic per-path seeds; errors surfaced
// after the parallel region with the lowest failing path index.
template <class PathCost>
PathStats accumulate_paths(std::int64_t n_paths, std::uint64_t seed, PathCost&& cost) {
  std::vector<double> totals(static_cast<std::size_t>(n_paths));
  std::atomic<std::int64_t> first_bad{-1};
  std::mutex err_mutex;
  std::string err_msg;
  parallel_for_index(n_paths, [&](std::int64_t p) {
    if (first_bad.load(std::memory_order_relaxed) >= 0) return;
    try {
      Rng rng(derive_seed(seed, "path", static_cast<std::uint64_t>(p)));
      totals[static_cast<std::size_t>(p)] = cost(rng, p);
    } catch (const std::exception& ex) {
      std::int64_t expect = first_bad.load();
      while ((expect < 0 || p < expect) && !first_bad.compare_exchange_weak(expect, p)) {
      }
      if (first_bad.load() == p) {
        std::lock_guard<std::mutex> lock(err_mutex);
        err_msg = ex.what();
      }
    }
  });
  if (first_bad.load() >= 0) throw NumericError(err_msg);
  PathStats st;
  st.n = n_paths;
  for (double v : totals) {
    st.sum += v;
    st.sum_sq += v * v;
  }
  return st;
}

}  // namespace

double gaussian_kl(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1,
                   const Eigen::VectorXd& mean2, const Eigen::MatrixXd& cov2) {
  const Eigen::Index d = mean1.size();
  if (mean2.size() != d || cov1.rows() != d || cov1.cols() != d || cov2.rows() != d ||
      cov2.cols() != d)
    throw ContractViolation("gaussian_kl: dimension mismatch");
  Eigen::LLT<Eigen::MatrixXd> llt1(cov1);
  Eigen::LLT<Eigen::MatrixXd> llt2(cov2);
  if (llt1.info() != Eigen::Success)
    throw ContractViolation("gaussian_kl: first covariance not positive definite");
  if (llt2.info() != Eigen::Success)
    throw ContractViolation("gaussian_kl: second covariance not positive definite");
  double log_det1 = 0.0, log_det2 = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    log_det1 += 2.0 * std::log(Eigen::MatrixXd(llt1.matrixL())(i, i));
    log_det2 += 2.0 * std::log(Eigen::MatrixXd(llt2.matrixL())(i, i));
  }
  const Eigen::MatrixXd solved = llt2.solve(cov1);
  const Eigen::VectorXd dm = mean2 - mean1;
  const double quad = dm.dot(llt2.solve(dm));
  return 0.5 * (solved.trace() + quad - d + log_det2 - log_det1);
}

KlEstimate girsanov_path_kl(const NoiseSchedule& schedule, double sigma, const DriftField& drift_a,
                            const DriftField& drift_b, const InitialCondition& init,
                            std::int64_t n_paths, int n_steps, std::uint64_t seed) {
  if (n_paths < 2) throw ContractViolation("girsanov_path_kl: n_paths must be >= 2");
  if (n_steps < 1) throw ContractViolation("girsanov_path_kl: n_steps must be >= 1");
  if (drift_a.dim() != drift_b.dim())
    throw ContractViolation("girsanov_path_kl: drift dimension mismatch");
  if (init.kind == InitKind::ExactPT && init.target == nullptr)
    throw ContractViolation("girsanov_path_kl: exact_pT initialization requires a target");

  const int d = drift_a.dim();
  const double T = schedule.horizon();
  const double dt = T / n_steps;
  std::unique_ptr<GaussianMixture> p_T;
  if (init.kind == InitKind::ExactPT)
    p_T = std::make_unique<GaussianMixture>(init.target->marginal_at(schedule, sigma, T));

  PathStats st = accumulate_paths(n_paths, seed, [&](Rng& rng, std::int64_t p) {
    auto scratch_a = drift_a.make_scratch();
    auto scratch_b = drift_b.make_scratch();
    Eigen::VectorXd y(d), ba(d), bb(d);
    if (init.kind == InitKind::ReferenceGaussian) {
      for (int i = 0; i < d; ++i) y[i] = sigma * rng.normal();
    } else {
      y = p_T->sample(rng);
    }
    double kl = 0.0;
    for (int k = 0; k < n_steps; ++k) {
      const double t = k * dt;
      const double beta = schedule.beta(T - t);
      const double g_sq = 2.0 * sigma * sigma * beta;
      drift_a.eval(y.data(), t, ba.data(), scratch_a.get());
      drift_b.eval(y.data(), t, bb.data(), scratch_b.get());
      kl += (ba - bb).squaredNorm() / (2.0 * g_sq) * dt;
      const double diff = sigma * std::sqrt(2.0 * beta * dt);
      for (int i = 0; i < d; ++i) y[i] += ba[i] * dt + diff * rng.normal();
      if (!y.allFinite()) {
        std::ostringstream oss;
        oss << "girsanov_path_kl: path " << p << " diverged at step " << k + 1;
        throw NumericError(oss.str());
      }
    }
    return kl;
  });
  return finalize(st);
}

TargetDensity TargetDensity::from_mixture(const GaussianMixture& gmm) {
  TargetDensity t;
  t.dim = gmm.dim();
  t.normalized = true;
  t.log_density = [gmm](const Eigen::VectorXd& x) { return gmm.log_density(x); };
  return t;
}

KlEstimate reverse_kl_objective(const NoiseSchedule& schedule, double sigma,
                                const CorrectionField& f_theta, const TargetDensity& target,
                                std::int64_t n_paths, int n_steps, std::uint64_t seed) {
  if (n_paths < 2) throw ContractViolation("reverse_kl_objective: n_paths must be >= 2");
  if (n_steps < 1) throw ContractViolation("reverse_kl_objective: n_steps must be >= 1");
  if (target.dim <= 0 || !target.log_density)
    throw ContractViolation("reverse_kl_objective: target must provide a log density");

  const int d = target.dim;
  const double T = schedule.horizon();
  const double dt = T / n_steps;
  const double s2 = sigma * sigma;

  PathStats st = accumulate_paths(n_paths, seed, [&](Rng& rng, std::int64_t p) {
    Eigen::VectorXd y(d);
    for (int i = 0; i < d; ++i) y[i] = sigma * rng.normal();
    double running = 0.0;
    for (int k = 0; k < n_steps; ++k) {
      const double t = k * dt;
      const double t_fwd = T - t;
      const double beta = schedule.beta(t_fwd);
      const Eigen::VectorXd f = f_theta(y, t_fwd);
      running += s2 * beta * f.squaredNorm() * dt;
      const double diff = sigma * std::sqrt(2.0 * beta * dt);
      for (int i = 0; i < d; ++i)
        y[i] += -beta * (y[i] - 2.0 * s2 * f[i]) * dt + diff * rng.normal();
      if (!y.allFinite()) {
        std::ostringstream oss;
        oss << "reverse_kl_objective: path " << p << " diverged at step " << k + 1;
        throw NumericError(oss.str());
      }
    }
    const double log_ref = -0.5 * (d * (kLog2Pi + std::log(s2)) + y.squaredNorm() / s2);
    return running + log_ref - target.log_density(y);
  });
  KlEstimate e = finalize(st);
  e.up_to_additive_constant = !target.normalized;
  return e;
}

KlBudget mixing_bound(double T, double kl0, double epsilon) {
  if (kl0 < 0.0) throw ContractViolation("mixing_bound: kl0 must be nonnegative");
  if (epsilon < 0.0) throw ContractViolation("mixing_bound: epsilon must be nonnegative");
  if (!(T >= 0.0)) throw ContractViolation("mixing_bound: T must be nonnegative");
  KlBudget b;
  b.mixing_term = std::exp(-T) * kl0;
  b.drift_term = T * epsilon;
  b.total = b.mixing_term + b.drift_term;
  return b;
}

double empirical_marginal_kl(const RowMajorMatrix& samples, const GaussianMixture& reference) {
  const std::int64_t n = samples.rows();
  const Eigen::Index d = samples.cols();
  if (n < 1000) throw ContractViolation("empirical_marginal_kl: needs >= 1e3 samples");
  if (d != reference.dim())
    throw ContractViolation("empirical_marginal_kl: dimension mismatch");
  const Eigen::VectorXd mean = samples.colwise().mean().transpose();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (std::int64_t i = 0; i < n; ++i) {
    const Eigen::VectorXd diff = samples.row(i).transpose() - mean;
    cov += diff * diff.transpose();
  }
  cov /= static_cast<double>(n - 1);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw NumericError("empirical_marginal_kl: sample covariance is singular (degenerate data)");
  return gaussian_kl(mean, cov, reference.mean(), reference.covariance());
}

}  // namespace vpsde
