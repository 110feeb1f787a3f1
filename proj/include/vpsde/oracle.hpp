// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vpsde/mixture.hpp"
#include "vpsde/schedule.hpp"

namespace vpsde {

// Allocation-free evaluator for the time-t marginal p_t of a Gaussian-mixture
// target under the VP-SDE. Each component covariance is eigendecomposed once;
// the marginal covariance (1-lambda) S_k + sigma^2 lambda I shares the same
// eigenbasis, so density and score at any t cost O(K d^2) with no factorization
// in the loop. This is the oracle used by drifts, semigroup references and the
// score-error reports, where it is called ~1e8 times.
class MarginalOracle {
 public:
  MarginalOracle(const GaussianMixture& target, const NoiseSchedule& schedule, double sigma);

  struct Workspace {
    Eigen::VectorXd diff, rot, scaled, pdiff;
    Eigen::VectorXd comp_log;
    Eigen::MatrixXd comp_pd;
  };
  Workspace make_workspace() const;

  int dim() const { return dim_; }
  double sigma() const { return sigma_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  // log p_t(y) and optionally its gradient (score_out may be null).
  void eval(const double* y, double t, double& log_density_out, double* score_out,
            Workspace& ws) const;

  double log_density(const Eigen::VectorXd& y, double t) const;
  Eigen::VectorXd score(const Eigen::VectorXd& y, double t) const;

  // log [ p_t(y) / N(y; 0, sigma^2 I) ].
  double log_density_ratio(const Eigen::VectorXd& y, double t) const;

  // grad log of the ratio: score + y / sigma^2.
  Eigen::VectorXd log_ratio_grad(const Eigen::VectorXd& y, double t) const;

 private:
  int dim_;
  double sigma_;
  NoiseSchedule schedule_;
  std::vector<double> log_weight_;
  std::vector<Eigen::VectorXd> mean_;
  std::vector<Eigen::MatrixXd> basis_;   // Q_k
  std::vector<Eigen::VectorXd> eigval_;  // eigenvalues of S_k
};

}  // namespace vpsde
