// SPDX-License-Identifier: Apache-2.0
#include "vpsde/semigroup.hpp"

#include <cmath>
#include <sstream>

#include "vpsde/errors.hpp"
#include "vpsde/rng.hpp"

namespace vpsde {

PointCloud sample_cloud(int dim, std::int64_t n, std::uint64_t seed) {
  if (dim <= 0) throw ContractViolation("sample_cloud: dim must be positive");
  if (n < 2) throw ContractViolation("sample_cloud: N must be >= 2");
  PointCloud cloud;
  cloud.seed = seed;
  cloud.radius_bound = 8.0 * std::sqrt((dim + 6) * std::log(static_cast<double>(n)));
  cloud.points.resize(n, dim);
  for (int attempt = 1; attempt <= 100; ++attempt) {
    Rng rng(derive_seed(seed, "cloud", static_cast<std::uint64_t>(attempt)));
    double max_sq = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      double sq = 0.0;
      for (int j = 0; j < dim; ++j) {
        const double z = rng.normal();
        cloud.points(i, j) = z;
        sq += z * z;
      }
      if (sq > max_sq) max_sq = sq;
    }
    if (std::sqrt(max_sq) <= cloud.radius_bound) {
      cloud.attempts = attempt;
      return cloud;
    }
  }
  std::ostringstream oss;
  oss << "sample_cloud: radius bound " << cloud.radius_bound << " violated 100 times (N = " << n
      << ", d = " << dim << "); RNG defect suspected";
  throw ImprobableEventError(oss.str());
}

namespace detail {

ValueGradStats finalize_stats(const McAccum& acc, std::int64_t n, int d) {
  ValueGradStats s;
  s.n = n;
  const double dn = static_cast<double>(n);
  s.value = acc.sv / dn;
  s.grad = acc.sg / dn;
  s.grad_se = Eigen::VectorXd::Zero(d);
  s.ratio_se = Eigen::VectorXd::Zero(d);
  if (n > 1) {
    const double var_v = std::max(0.0, (acc.svv - dn * s.value * s.value) / (dn - 1.0));
    s.value_se = std::sqrt(var_v / dn);
    for (int j = 0; j < d; ++j) {
      const double var_g = std::max(0.0, (acc.sgg[j] - dn * s.grad[j] * s.grad[j]) / (dn - 1.0));
      s.grad_se[j] = std::sqrt(var_g / dn);
      if (s.value != 0.0) {
        const double r = s.grad[j] / s.value;
        const double cov_gv = (acc.sgv[j] - dn * s.grad[j] * s.value) / (dn - 1.0);
        const double var_r = std::max(0.0, var_g - 2.0 * r * cov_gv + r * r * var_v);
        s.ratio_se[j] = std::sqrt(var_r / dn) / std::abs(s.value);
      }
    }
  }
  return s;
}

}  // namespace detail

SemigroupEstimator::SemigroupEstimator(PointCloud cloud, RadonNikodym rnd, NoiseSchedule schedule,
                                       double clip_level)
    : cloud_(std::move(cloud)),
      rnd_(std::move(rnd)),
      schedule_(std::move(schedule)),
      clip_level_(clip_level) {
  if (cloud_.dim() != rnd_.dim())
    throw ContractViolation("SemigroupEstimator: cloud and ratio dimension mismatch");
  if (clip_level_ <= 0.0) clip_level_ = 2.0 * rnd_.lipschitz() / rnd_.lower_bound();
  if (!(clip_level_ > 0.0)) throw ContractViolation("SemigroupEstimator: clip level must be positive");
}

std::pair<double, double> SemigroupEstimator::scales(double t) const {
  if (!(t >= 0.0)) throw ContractViolation("SemigroupEstimator: t must be nonnegative");
  const double tau = schedule_.beta_integral(t);
  const double scale = std::exp(-tau);
  const double noise = rnd_.sigma() * std::sqrt(-std::expm1(-2.0 * tau));
  return {scale, noise};
}

ValueGradStats SemigroupEstimator::ou_mc(const Eigen::VectorXd& x, double t) const {
  if (x.size() != dim()) throw ContractViolation("ou_mc: dimension mismatch");
  const auto [scale, noise] = scales(t);
  return detail::mc_kernel(cloud_.points, scale, noise, x.data(), [this]() {
    return [ws = rnd_.make_workspace(), this](const double* arg, double& v, double* g) mutable {
      rnd_.eval(arg, v, g, ws);
    };
  });
}

ValueGradStats SemigroupEstimator::ou_mc_reference(const Eigen::VectorXd& x, double t) const {
  if (x.size() != dim()) throw ContractViolation("ou_mc_reference: dimension mismatch");
  const auto [scale, noise] = scales(t);
  auto ws = rnd_.make_workspace();
  return detail::mc_kernel_serial(cloud_.points, scale, noise, x.data(),
                                  [&](const double* arg, double& v, double* g) {
                                    rnd_.eval(arg, v, g, ws);
                                  });
}

Eigen::VectorXd SemigroupEstimator::drift_raw(const Eigen::VectorXd& x, double t) const {
  const ValueGradStats s = ou_mc(x, t);
  if (!(s.value > 0.0)) {
    std::ostringstream oss;
    oss << "drift: semigroup value " << s.value << " <= 0 at t = " << t
        << " (f is bounded below by c > 0; this indicates a numeric fault)";
    throw NumericError(oss.str());
  }
  return s.grad / s.value;
}

Eigen::VectorXd SemigroupEstimator::drift(const Eigen::VectorXd& x, double t) const {
  return drift_raw(x, t).cwiseMax(-clip_level_).cwiseMin(clip_level_);
}

Eigen::VectorXd SemigroupEstimator::score(const Eigen::VectorXd& y, double t) const {
  const double s2 = rnd_.sigma() * rnd_.sigma();
  return -y / s2 + drift(y, t);
}

SemigroupEstimator::ScoreWithError SemigroupEstimator::score_with_se(const Eigen::VectorXd& y,
                                                                     double t) const {
  const ValueGradStats s = ou_mc(y, t);
  if (!(s.value > 0.0)) throw NumericError("score: semigroup value <= 0");
  const double s2 = rnd_.sigma() * rnd_.sigma();
  Eigen::VectorXd ratio =
      (s.grad / s.value).cwiseMax(-clip_level_).cwiseMin(clip_level_);
  return {-y / s2 + ratio, s.ratio_se};
}

SemigroupOracle::SemigroupOracle(const RadonNikodym& rnd, const NoiseSchedule& schedule)
    : oracle_(rnd.target(), schedule, rnd.sigma()) {}

double SemigroupOracle::value(const Eigen::VectorXd& x, double t) const {
  return std::exp(oracle_.log_density_ratio(x, t));
}

Eigen::VectorXd SemigroupOracle::log_grad(const Eigen::VectorXd& x, double t) const {
  return oracle_.log_ratio_grad(x, t);
}

double ou_semigroup_oracle(const RadonNikodym& rnd, const NoiseSchedule& schedule,
                           const Eigen::VectorXd& x, double t) {
  return SemigroupOracle(rnd, schedule).value(x, t);
}

ValueGradStats heat_semigroup_mc(const RadonNikodym& rnd, const PointCloud& cloud,
                                 const Eigen::VectorXd& x, double t) {
  if (!(t >= 0.0)) throw ContractViolation("heat_semigroup_mc: t must be nonnegative");
  if (x.size() != cloud.dim() || rnd.dim() != cloud.dim())
    throw ContractViolation("heat_semigroup_mc: dimension mismatch");
  return detail::mc_kernel(cloud.points, 1.0, std::sqrt(t), x.data(), [&rnd]() {
    return [ws = rnd.make_workspace(), &rnd](const double* arg, double& v, double* g) mutable {
      rnd.eval(arg, v, g, ws);
    };
  });
}

}  // namespace vpsde
