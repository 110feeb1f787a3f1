// SPDX-License-Identifier: Apache-2.0
#include "vpsde/schedule.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "vpsde/errors.hpp"

namespace vpsde {

NoiseSchedule::NoiseSchedule(Kind kind, double b0, double b1, double horizon)
    : kind_(kind), beta0_(b0), beta1_(b1), horizon_(horizon) {
  if (!(horizon > 0.0)) throw ContractViolation("NoiseSchedule: horizon must be positive");
  if (!(b0 > 0.0)) throw ContractViolation("NoiseSchedule: beta must be positive");
  if (kind == Kind::Linear) {
    if (!(b1 > 0.0)) throw ContractViolation("NoiseSchedule: beta_max must be positive");
    if (b1 < b0)
      throw ContractViolation("NoiseSchedule: linear schedule requires beta_min <= beta_max");
  }
  if (weak_mixing()) {
    std::cerr << "[vpsde] warning: int_0^T beta = " << beta_integral(horizon_)
              << " < 2; terminal marginal may be far from the reference Gaussian\n";
  }
}

NoiseSchedule NoiseSchedule::constant(double beta, double horizon) {
  return NoiseSchedule(Kind::Constant, beta, beta, horizon);
}

NoiseSchedule NoiseSchedule::linear(double beta_min, double beta_max, double horizon) {
  return NoiseSchedule(Kind::Linear, beta_min, beta_max, horizon);
}

double NoiseSchedule::beta(double t) const {
  if (kind_ == Kind::Constant) return beta0_;
  return beta0_ + (beta1_ - beta0_) * (t / horizon_);
}

double NoiseSchedule::beta_integral(double t) const {
  if (kind_ == Kind::Constant) return beta0_ * t;
  const double slope = (beta1_ - beta0_) / horizon_;
  return beta0_ * t + 0.5 * slope * t * t;
}

double NoiseSchedule::lambda_unchecked(double t) const {
  return -std::expm1(-2.0 * beta_integral(t));
}

double NoiseSchedule::lambda(double t) const {
  if (!(t >= 0.0) || t > horizon_) {
    std::ostringstream oss;
    oss << "NoiseSchedule::lambda: t = " << t << " outside [0, " << horizon_ << "]";
    throw ContractViolation(oss.str());
  }
  return lambda_unchecked(t);
}

std::string NoiseSchedule::describe() const {
  std::ostringstream oss;
  if (kind_ == Kind::Constant) {
    oss << "constant(beta=" << beta0_ << ", T=" << horizon_ << ")";
  } else {
    oss << "linear(beta_min=" << beta0_ << ", beta_max=" << beta1_ << ", T=" << horizon_ << ")";
  }
  return oss.str();
}

}  // namespace vpsde
