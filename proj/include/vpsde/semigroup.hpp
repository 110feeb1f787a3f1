// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "vpsde/oracle.hpp"
#include "vpsde/parallel.hpp"
#include "vpsde/radon_nikodym.hpp"
#include "vpsde/schedule.hpp"

namespace vpsde {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fixed set of standard-normal points z_1..z_N shared by all evaluations of an
// empirical semigroup (common random numbers). The max-norm bound is part of
// the construction: clouds violating it are resampled wholesale.
struct PointCloud {
  RowMajorMatrix points;  // N x d
  std::uint64_t seed = 0;
  double radius_bound = 0.0;
  int attempts = 0;

  std::int64_t size() const { return points.rows(); }
  int dim() const { return static_cast<int>(points.cols()); }
};

// Draws n i.i.d. standard normal points in R^dim, resampling (at most 100
// times) until max_n ||z_n|| <= 8 sqrt((dim+6) log n). Deterministic in seed.
PointCloud sample_cloud(int dim, std::int64_t n, std::uint64_t seed);

// Monte-Carlo mean of a scalar field and its gradient over a point cloud,
// with enough second-moment bookkeeping to report standard errors for the
// value, the gradient, and the log-gradient ratio grad/value.
struct ValueGradStats {
  double value = 0.0;
  Eigen::VectorXd grad;
  double value_se = 0.0;
  Eigen::VectorXd grad_se;
  Eigen::VectorXd ratio_se;  // delta-method SE of grad_i / value
  std::int64_t n = 0;
};

namespace detail {

struct McAccum {
  double sv = 0.0, svv = 0.0;
  Eigen::VectorXd sg, sgg, sgv;
  bool init = false;
  void ensure(int d) {
    if (!init) {
      sg = Eigen::VectorXd::Zero(d);
      sgg = Eigen::VectorXd::Zero(d);
      sgv = Eigen::VectorXd::Zero(d);
      init = true;
    }
  }
};

ValueGradStats finalize_stats(const McAccum& acc, std::int64_t n, int d);

// Shared kernel for the empirical semigroups: the field is evaluated at
// arg = scale * x + noise * z_n and its gradient picks up the chain factor
// `scale`. make_eval() returns a per-chunk evaluator
//   eval(const double* arg, double& value, double* grad)
// so each chunk owns its workspace.
template <class MakeEval>
ValueGradStats mc_kernel(const RowMajorMatrix& pts, double scale, double noise, const double* x,
                         MakeEval&& make_eval) {
  const int d = static_cast<int>(pts.cols());
  const std::int64_t n = pts.rows();
  struct Ctx {
    std::decay_t<decltype(std::declval<MakeEval>()())> eval;
    Eigen::VectorXd arg, grad;
  };
  auto make_ctx = [&]() {
    Ctx c{make_eval(), Eigen::VectorXd(d), Eigen::VectorXd(d)};
    return c;
  };
  McAccum total = chunked_reduce_ctx<McAccum>(
      n, make_ctx,
      [&](McAccum& acc, Ctx& ctx, std::int64_t i) {
        acc.ensure(d);
        const double* z = pts.data() + i * d;
        for (int j = 0; j < d; ++j) ctx.arg[j] = scale * x[j] + noise * z[j];
        double v;
        ctx.eval(ctx.arg.data(), v, ctx.grad.data());
        acc.sv += v;
        acc.svv += v * v;
        for (int j = 0; j < d; ++j) {
          const double g = scale * ctx.grad[j];
          acc.sg[j] += g;
          acc.sgg[j] += g * g;
          acc.sgv[j] += g * v;
        }
      },
      [&](McAccum& tot, const McAccum& part) {
        tot.ensure(d);
        if (!part.init) return;
        tot.sv += part.sv;
        tot.svv += part.svv;
        tot.sg += part.sg;
        tot.sgg += part.sgg;
        tot.sgv += part.sgv;
      });
  return finalize_stats(total, n, d);
}

// Plain serial loop over the cloud in index order; reference implementation
// kept for testing the parallel kernel and for the benchmark baseline.
template <class Eval>
ValueGradStats mc_kernel_serial(const RowMajorMatrix& pts, double scale, double noise,
                                const double* x, Eval&& eval) {
  const int d = static_cast<int>(pts.cols());
  const std::int64_t n = pts.rows();
  McAccum acc;
  acc.ensure(d);
  Eigen::VectorXd arg(d), grad(d);
  for (std::int64_t i = 0; i < n; ++i) {
    const double* z = pts.data() + i * d;
    for (int j = 0; j < d; ++j) arg[j] = scale * x[j] + noise * z[j];
    double v;
    eval(arg.data(), v, grad.data());
    acc.sv += v;
    acc.svv += v * v;
    for (int j = 0; j < d; ++j) {
      const double g = scale * grad[j];
      acc.sg[j] += g;
      acc.sgg[j] += g * g;
      acc.sgv[j] += g * v;
    }
  }
  return finalize_stats(acc, n, d);
}

}  // namespace detail

// Empirical VP-SDE semigroup built from one point cloud and a density ratio,
// with the clipped log-gradient drift on top. Immutable after construction;
// evaluations at different (x, t) are pure and may run concurrently.
class SemigroupEstimator {
 public:
  // clip_level <= 0 selects the default 2 L / c.
  SemigroupEstimator(PointCloud cloud, RadonNikodym rnd, NoiseSchedule schedule,
                     double clip_level = 0.0);

  const PointCloud& cloud() const { return cloud_; }
  const RadonNikodym& ratio() const { return rnd_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  double clip_level() const { return clip_level_; }
  int dim() const { return rnd_.dim(); }

  // (1/N) sum f(e^{-tau} x + sigma sqrt(1-e^{-2tau}) z_n) and its x-gradient,
  // tau = int_0^t beta. The chain factor e^{-tau} is applied exactly once.
  ValueGradStats ou_mc(const Eigen::VectorXd& x, double t) const;

  // Serial reference implementation of ou_mc (identical sums, index order).
  ValueGradStats ou_mc_reference(const Eigen::VectorXd& x, double t) const;

  // Componentwise clip(grad/value) with the estimator's clip level.
  Eigen::VectorXd drift(const Eigen::VectorXd& x, double t) const;

  // Unclipped ratio grad/value (diagnostics, tests).
  Eigen::VectorXd drift_raw(const Eigen::VectorXd& x, double t) const;

  // Score estimate: -y/sigma^2 + clipped log-gradient of the semigroup.
  Eigen::VectorXd score(const Eigen::VectorXd& y, double t) const;

  struct ScoreWithError {
    Eigen::VectorXd score;
    Eigen::VectorXd se;  // per-component delta-method SE of the ratio part
  };
  ScoreWithError score_with_se(const Eigen::VectorXd& y, double t) const;

 private:
  std::pair<double, double> scales(double t) const;  // (e^{-tau}, sigma sqrt(1-e^{-2tau}))

  PointCloud cloud_;
  RadonNikodym rnd_;
  NoiseSchedule schedule_;
  double clip_level_;
};

// Exact semigroup for mixture targets: U_t f(x) = p_t(x) / N(x; 0, sigma^2 I),
// evaluated through the closed-form marginal. Strictly positive.
class SemigroupOracle {
 public:
  SemigroupOracle(const RadonNikodym& rnd, const NoiseSchedule& schedule);

  double value(const Eigen::VectorXd& x, double t) const;
  // grad log U_t f = score_t(x) + x / sigma^2.
  Eigen::VectorXd log_grad(const Eigen::VectorXd& x, double t) const;

  const MarginalOracle& marginal() const { return oracle_; }

 private:
  MarginalOracle oracle_;
};

double ou_semigroup_oracle(const RadonNikodym& rnd, const NoiseSchedule& schedule,
                           const Eigen::VectorXd& x, double t);

// Heat-semigroup analogue: mean of f(x + sqrt(t) z_n), gradient without any
// contraction factor.
ValueGradStats heat_semigroup_mc(const RadonNikodym& rnd, const PointCloud& cloud,
                                 const Eigen::VectorXd& x, double t);

}  // namespace vpsde
