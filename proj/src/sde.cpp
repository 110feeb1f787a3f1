// SPDX-License-Identifier: Apache-2.0
#include "vpsde/sde.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>

#include "vpsde/errors.hpp"
#include "vpsde/parallel.hpp"
#include "vpsde/rng.hpp"

namespace vpsde {

Eigen::VectorXd DriftField::operator()(const Eigen::VectorXd& y, double t_rev) const {
  Eigen::VectorXd out(dim());
  auto scratch = make_scratch();
  eval(y.data(), t_rev, out.data(), scratch.get());
  return out;
}

namespace {

class ReferenceDrift final : public DriftField {
 public:
  ReferenceDrift(const NoiseSchedule& schedule, int dim) : schedule_(schedule), dim_(dim) {}
  int dim() const override { return dim_; }
  void eval(const double* y, double t_rev, double* out, Scratch*) const override {
    const double b = schedule_.beta(schedule_.horizon() - t_rev);
    for (int i = 0; i < dim_; ++i) out[i] = -b * y[i];
  }

 private:
  NoiseSchedule schedule_;
  int dim_;
};

class OracleDrift final : public DriftField {
 public:
  // value_form = false: b = beta (y + 2 sigma^2 score);
  // value_form = true:  b = -beta (y - 2 sigma^2 (score + y/sigma^2)).
  OracleDrift(const GaussianMixture& target, const NoiseSchedule& schedule, double sigma,
              bool value_form)
      : oracle_(target, schedule, sigma), sigma_(sigma), value_form_(value_form) {}

  struct Ws final : Scratch {
    MarginalOracle::Workspace oracle;
    Eigen::VectorXd score;
  };

  int dim() const override { return oracle_.dim(); }

  std::unique_ptr<Scratch> make_scratch() const override {
    auto ws = std::make_unique<Ws>();
    ws->oracle = oracle_.make_workspace();
    ws->score.resize(oracle_.dim());
    return ws;
  }

  void eval(const double* y, double t_rev, double* out, Scratch* scratch) const override {
    auto* ws = static_cast<Ws*>(scratch);
    std::unique_ptr<Scratch> owned;
    if (ws == nullptr) {
      owned = make_scratch();
      ws = static_cast<Ws*>(owned.get());
    }
    const double T = oracle_.schedule().horizon();
    const double t_fwd = T - t_rev;
    const double beta = oracle_.schedule().beta(t_fwd);
    const double s2 = sigma_ * sigma_;
    double lp;
    oracle_.eval(y, t_fwd, lp, ws->score.data(), ws->oracle);
    if (!value_form_) {
      for (int i = 0; i < dim(); ++i) out[i] = beta * (y[i] + 2.0 * s2 * ws->score[i]);
    } else {
      for (int i = 0; i < dim(); ++i)
        out[i] = -beta * (y[i] - 2.0 * s2 * (ws->score[i] + y[i] / s2));
    }
  }

 private:
  MarginalOracle oracle_;
  double sigma_;
  bool value_form_;
};

class EstimatorDrift final : public DriftField {
 public:
  explicit EstimatorDrift(std::shared_ptr<const SemigroupEstimator> est) : est_(std::move(est)) {}
  int dim() const override { return est_->dim(); }
  void eval(const double* y, double t_rev, double* out, Scratch*) const override {
    const auto& schedule = est_->schedule();
    const double t_fwd = schedule.horizon() - t_rev;
    const double beta = schedule.beta(t_fwd);
    const double s2 = est_->ratio().sigma() * est_->ratio().sigma();
    const Eigen::Map<const Eigen::VectorXd> yv(y, dim());
    const Eigen::VectorXd s = est_->score(yv, t_fwd);
    for (int i = 0; i < dim(); ++i) out[i] = beta * (y[i] + 2.0 * s2 * s[i]);
  }

 private:
  std::shared_ptr<const SemigroupEstimator> est_;
};

class CustomDrift final : public DriftField {
 public:
  CustomDrift(int dim, std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> fn)
      : dim_(dim), fn_(std::move(fn)) {}
  int dim() const override { return dim_; }
  void eval(const double* y, double t_rev, double* out, Scratch*) const override {
    const Eigen::Map<const Eigen::VectorXd> yv(y, dim_);
    const Eigen::VectorXd b = fn_(yv, t_rev);
    for (int i = 0; i < dim_; ++i) out[i] = b[i];
  }

 private:
  int dim_;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> fn_;
};

}  // namespace

std::unique_ptr<DriftField> make_reference_drift(const NoiseSchedule& schedule, int dim) {
  return std::make_unique<ReferenceDrift>(schedule, dim);
}

std::unique_ptr<DriftField> make_oracle_score_drift(const GaussianMixture& target,
                                                    const NoiseSchedule& schedule, double sigma) {
  return std::make_unique<OracleDrift>(target, schedule, sigma, false);
}

std::unique_ptr<DriftField> make_value_function_drift(const GaussianMixture& target,
                                                      const NoiseSchedule& schedule,
                                                      double sigma) {
  return std::make_unique<OracleDrift>(target, schedule, sigma, true);
}

std::unique_ptr<DriftField> make_estimator_drift(std::shared_ptr<const SemigroupEstimator> est) {
  return std::make_unique<EstimatorDrift>(std::move(est));
}

std::unique_ptr<DriftField> make_custom_drift(
    int dim, std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> fn) {
  return std::make_unique<CustomDrift>(dim, std::move(fn));
}

Eigen::VectorXd forward_sample(const NoiseSchedule& schedule, double sigma,
                               const Eigen::VectorXd& x0, double t, std::uint64_t seed) {
  if (!(t >= 0.0) || t > schedule.horizon())
    throw ContractViolation("forward_sample: t outside [0, T]");
  const double lambda = schedule.lambda_unchecked(t);
  Rng rng(seed);
  Eigen::VectorXd x = std::sqrt(1.0 - lambda) * x0;
  const double sd = sigma * std::sqrt(lambda);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += sd * rng.normal();
  return x;
}

SimResult simulate_reverse(const NoiseSchedule& schedule, double sigma, const DriftField& drift,
                           const InitialCondition& init, const SimulateOptions& opts) {
  if (opts.n_steps < 10) throw ContractViolation("simulate_reverse: n_steps must be >= 10");
  if (opts.n_particles < 1) throw ContractViolation("simulate_reverse: n_particles must be >= 1");
  if (init.kind == InitKind::ExactPT && init.target == nullptr)
    throw ContractViolation("simulate_reverse: exact_pT initialization requires a target");

  const int d = drift.dim();
  const double T = schedule.horizon();
  const double dt = T / opts.n_steps;

  // Initial sampler state shared read-only across particles.
  std::unique_ptr<GaussianMixture> p_T;
  if (init.kind == InitKind::ExactPT)
    p_T = std::make_unique<GaussianMixture>(init.target->marginal_at(schedule, sigma, T));

  SimResult result;
  result.samples.resize(opts.n_particles, d);
  if (opts.record_paths) result.paths.resize(static_cast<std::size_t>(opts.n_particles));

  std::atomic<std::int64_t> first_bad{-1};
  std::mutex err_mutex;
  std::string err_msg;

  parallel_for_index(opts.n_particles, [&](std::int64_t p) {
    if (first_bad.load(std::memory_order_relaxed) >= 0) return;
    try {
      const std::uint64_t pseed = derive_seed(opts.seed, "particle", static_cast<std::uint64_t>(p));
      Rng rng(pseed);
      auto scratch = drift.make_scratch();
      Eigen::VectorXd y(d), b(d);
      if (init.kind == InitKind::ReferenceGaussian) {
        for (int i = 0; i < d; ++i) y[i] = sigma * rng.normal();
      } else {
        y = p_T->sample(rng);
      }
      Trajectory* traj = nullptr;
      if (opts.record_paths) {
        traj = &result.paths[static_cast<std::size_t>(p)];
        traj->seed = pseed;
        traj->times.reserve(opts.n_steps + 1);
        traj->states.reserve(opts.n_steps + 1);
        traj->times.push_back(0.0);
        traj->states.push_back(y);
      }
      for (int k = 0; k < opts.n_steps; ++k) {
        const double t = k * dt;
        drift.eval(y.data(), t, b.data(), scratch.get());
        const double diff = sigma * std::sqrt(2.0 * schedule.beta(T - t) * dt);
        for (int i = 0; i < d; ++i) y[i] += b[i] * dt + diff * rng.normal();
        if (!y.allFinite()) {
          std::ostringstream oss;
          oss << "simulate_reverse: non-finite state at step " << k + 1 << " (particle " << p
              << ")";
          throw NumericError(oss.str());
        }
        if (traj != nullptr) {
          traj->times.push_back(k + 1 == opts.n_steps ? T : (k + 1) * dt);
          traj->states.push_back(y);
        }
      }
      result.samples.row(p) = y.transpose();
    } catch (const std::exception& e) {
      std::int64_t expect = first_bad.load();
      while ((expect < 0 || p < expect) && !first_bad.compare_exchange_weak(expect, p)) {
      }
      if (first_bad.load() == p) {
        std::lock_guard<std::mutex> lock(err_mutex);
        err_msg = e.what();
      }
    }
  });

  if (first_bad.load() >= 0) throw NumericError(err_msg);
  return result;
}

}  // namespace vpsde
