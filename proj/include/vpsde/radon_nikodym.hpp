// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

#include "vpsde/mixture.hpp"

namespace vpsde {

// Density ratio f = d(target) / d(N(0, sigma^2 I)) with gradient access and
// regularity metadata: lipschitz bounds the difference quotients of f and of
// grad f, and lower_bound is a uniform lower bound of f, both over the working
// ball B(ball_radius). The working ball must contain every point where f will
// be evaluated for the metadata to be meaningful; callers that feed f noisy
// arguments (the semigroup estimators do) should size it accordingly.
class RadonNikodym {
 public:
  RadonNikodym(GaussianMixture target, double sigma, double lipschitz, double lower_bound,
               double ball_radius);

  // Estimates (L, c) over B(ball_radius) via estimate_regularity and builds
  // the ratio with those constants.
  static RadonNikodym with_estimated_constants(GaussianMixture target, double sigma,
                                               double ball_radius, int probe_count,
                                               std::uint64_t seed);

  struct Eval {
    double value;
    Eigen::VectorXd grad;
  };

  struct Workspace {
    MixtureWorkspace mix;
    Eigen::VectorXd score;
  };
  Workspace make_workspace() const;

  // value = exp(log target(x) - log ref(x)); grad = value * (score(x) + x/sigma^2).
  // grad_out may be null. Throws NumericError when the exponent leaves the
  // representable range (x far outside any sensible working ball).
  void eval(const double* x, double& value_out, double* grad_out, Workspace& ws) const;

  Eval operator()(const Eigen::VectorXd& x) const;
  double value(const Eigen::VectorXd& x) const;

  int dim() const { return target_.dim(); }
  const GaussianMixture& target() const { return target_; }
  double sigma() const { return sigma_; }
  double lipschitz() const { return lipschitz_; }
  double lower_bound() const { return lower_bound_; }
  double ball_radius() const { return ball_radius_; }

 private:
  GaussianMixture target_;
  double sigma_;
  double lipschitz_;
  double lower_bound_;
  double ball_radius_;
};

// Probes B^d(ball_radius) with a deterministic low-discrepancy sequence and
// returns safety-margined estimates: c = 0.9 * min f (floored at 1e-12,
// capped at 1), L = 1.1 * max difference quotient of f and grad f over probe
// pairs. The caller may override either value.
std::pair<double, double> estimate_regularity(const GaussianMixture& target, double sigma,
                                              double ball_radius, int probe_count,
                                              std::uint64_t seed);

// Deterministic low-discrepancy points in the ball B^d(radius); seed shifts
// the underlying Kronecker sequence. Shared by regularity estimation and the
// construction-time invariant probe.
std::vector<Eigen::VectorXd> ball_probe_points(int dim, double radius, int count,
                                               std::uint64_t seed);

}  // namespace vpsde
