// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "vpsde/mixture.hpp"
#include "vpsde/schedule.hpp"
#include "vpsde/sde.hpp"

namespace vpsde {

// Closed-form KL(N(mean1, cov1) || N(mean2, cov2)).
double gaussian_kl(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1,
                   const Eigen::VectorXd& mean2, const Eigen::MatrixXd& cov2);

struct KlEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t n_paths = 0;
  bool up_to_additive_constant = false;  // true when the target is unnormalized
};

// Path KL between the laws of dy = b_a dt + g dW and dy = b_b dt + g dW with
// shared diffusion g_t = sigma sqrt(2 beta_{T-t}), both started from `init`:
//   KL = int_0^T E_a ||b_a - b_b||^2 / (2 g_t^2) dt,
// estimated along Euler-Maruyama paths of the a-process.
KlEstimate girsanov_path_kl(const NoiseSchedule& schedule, double sigma, const DriftField& drift_a,
                            const DriftField& drift_b, const InitialCondition& init,
                            std::int64_t n_paths, int n_steps, std::uint64_t seed);

// Value-function correction field s(y, t_fwd); the reverse-KL objective
// integrates its squared norm along the controlled process.
using CorrectionField = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

struct TargetDensity {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&)> log_density;  // possibly unnormalized
  bool normalized = false;

  static TargetDensity from_mixture(const GaussianMixture& gmm);
};

// Reverse-KL objective of the controlled process
//   dy = -beta_{T-t} (y - 2 sigma^2 f_theta(y, T-t)) dt + sigma sqrt(2 beta_{T-t}) dW,
// y_0 ~ N(0, sigma^2 I):
//   E[ sigma^2 int_0^T beta_{T-t} ||f_theta||^2 dt + log N(y_T; 0, sigma^2 I) - log pi(y_T) ].
// For unnormalized targets the estimate is reported up to +log Z.
KlEstimate reverse_kl_objective(const NoiseSchedule& schedule, double sigma,
                                const CorrectionField& f_theta, const TargetDensity& target,
                                std::int64_t n_paths, int n_steps, std::uint64_t seed);

struct KlBudget {
  double mixing_term = 0.0;  // e^{-T} * kl0
  double drift_term = 0.0;   // T * epsilon
  double total = 0.0;
};

// Error budget e^{-T} kl0 + T epsilon for a drift accurate to epsilon with an
// approximate Gaussian initialization.
KlBudget mixing_bound(double T, double kl0, double epsilon);

// Moment-matched Gaussian KL proxy between samples and a reference law: fits
// N(mean, cov) to the samples and returns gaussian_kl(fit, moments(reference)).
// Exact when both laws are Gaussian; a documented proxy otherwise.
double empirical_marginal_kl(const RowMajorMatrix& samples, const GaussianMixture& reference);

}  // namespace vpsde
