// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

namespace vpsde {

// Noise schedule beta_t of the variance-preserving SDE
//   dx = -beta_t x dt + sigma sqrt(2 beta_t) dB
// together with the derived clock lambda_t = 1 - exp(-2 int_0^t beta_s ds).
// Supported shapes: constant beta and a linear ramp from beta_min to beta_max
// over [0, T]; both have closed-form integrals.
class NoiseSchedule {
 public:
  enum class Kind { Constant, Linear };

  static NoiseSchedule constant(double beta, double horizon);
  static NoiseSchedule linear(double beta_min, double beta_max, double horizon);

  Kind kind() const { return kind_; }
  double horizon() const { return horizon_; }
  double beta_min() const { return beta0_; }
  double beta_max() const { return beta1_; }

  // beta_t; defined for all t >= 0 (the linear ramp continues past T so that
  // stationary-limit evaluations of marginals remain meaningful).
  double beta(double t) const;

  // int_0^t beta_s ds, closed form.
  double beta_integral(double t) const;

  // lambda_t = 1 - exp(-2 int_0^t beta), in [0, 1). Unchecked t >= 0.
  double lambda_unchecked(double t) const;

  // Checked variant: requires 0 <= t <= horizon.
  double lambda(double t) const;

  // True when int_0^T beta < 2, i.e. the terminal marginal is a poor
  // approximation of the stationary Gaussian. Construction emits a warning
  // to stderr in that case; callers may also query it.
  bool weak_mixing() const { return beta_integral(horizon_) < 2.0; }

  std::string describe() const;

 private:
  NoiseSchedule(Kind kind, double b0, double b1, double horizon);

  Kind kind_;
  double beta0_;  // constant value, or ramp start
  double beta1_;  // ramp end (unused for constant)
  double horizon_;
};

}  // namespace vpsde
