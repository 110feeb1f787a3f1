// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vpsde/rng.hpp"
#include "vpsde/schedule.hpp"

namespace vpsde {

struct GaussianComponent {
  double weight;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Scratch space for repeated density/score evaluation. One instance per
// thread; no allocation happens inside the evaluation loop once sized.
struct MixtureWorkspace {
  Eigen::VectorXd diff;       // d
  Eigen::VectorXd pdiff;      // d
  Eigen::VectorXd comp_log;   // K: log w_k + log N_k(x)
  Eigen::MatrixXd comp_pd;    // d x K: P_k (x - m_k)
};

// Finite mixture of full-covariance Gaussians. The target family of the
// library: marginals under the VP-SDE, scores, and semigroup values are all
// closed-form, so every estimator can be checked against an oracle.
class GaussianMixture {
 public:
  GaussianMixture(int dim, std::vector<GaussianComponent> components);

  static GaussianMixture single(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);
  // Isotropic single Gaussian N(mean, s2 * I).
  static GaussianMixture isotropic(const Eigen::VectorXd& mean, double s2);
  static GaussianMixture standard(int dim) {
    return isotropic(Eigen::VectorXd::Zero(dim), 1.0);
  }

  int dim() const { return dim_; }
  int component_count() const { return static_cast<int>(comps_.size()); }
  const std::vector<GaussianComponent>& components() const { return comps_; }

  double log_density(const Eigen::VectorXd& x) const;

  // Gradient of log density (responsibility-weighted component scores).
  Eigen::VectorXd score(const Eigen::VectorXd& x) const;

  // Allocation-free fused evaluation; score_out may be null when only the
  // log density is needed. x points at dim() doubles.
  void eval(const double* x, double& log_density_out, double* score_out,
            MixtureWorkspace& ws) const;

  MixtureWorkspace make_workspace() const;

  // Pushforward under the VP-SDE forward kernel at time t:
  // weights unchanged, means scaled by sqrt(1 - lambda_t), covariances
  // (1 - lambda_t) S_k + sigma^2 lambda_t I.
  GaussianMixture marginal_at(const NoiseSchedule& schedule, double sigma, double t) const;

  Eigen::VectorXd sample(Rng& rng) const;

  // Moments of the mixture itself.
  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;

 private:
  int dim_;
  std::vector<GaussianComponent> comps_;
  std::vector<Eigen::MatrixXd> precision_;   // per component
  std::vector<Eigen::MatrixXd> chol_;        // lower-triangular factor of cov
  std::vector<double> log_norm_;             // log(w_k) - 0.5 (d log 2pi + log det S_k)
};

// Score of the time-t marginal: grad_y log p_t(y).
Eigen::VectorXd oracle_score(const GaussianMixture& target, const NoiseSchedule& schedule,
                             double sigma, double t, const Eigen::VectorXd& y);

}  // namespace vpsde
