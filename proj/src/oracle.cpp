// SPDX-License-Identifier: Apache-2.0
#include "vpsde/oracle.hpp"

#include <cmath>
#include <limits>

#include "vpsde/errors.hpp"

namespace vpsde {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

MarginalOracle::MarginalOracle(const GaussianMixture& target, const NoiseSchedule& schedule,
                               double sigma)
    : dim_(target.dim()), sigma_(sigma), schedule_(schedule) {
  if (!(sigma > 0.0)) throw ContractViolation("MarginalOracle: sigma must be positive");
  for (const auto& c : target.components()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.cov);
    if (es.info() != Eigen::Success)
      throw ContractViolation("MarginalOracle: eigendecomposition failed");
    log_weight_.push_back(std::log(c.weight));
    mean_.push_back(c.mean);
    basis_.push_back(es.eigenvectors());
    eigval_.push_back(es.eigenvalues());
  }
}

MarginalOracle::Workspace MarginalOracle::make_workspace() const {
  Workspace ws;
  const int K = static_cast<int>(mean_.size());
  ws.diff.resize(dim_);
  ws.rot.resize(dim_);
  ws.scaled.resize(dim_);
  ws.pdiff.resize(dim_);
  ws.comp_log.resize(K);
  ws.comp_pd.resize(dim_, K);
  return ws;
}

void MarginalOracle::eval(const double* y, double t, double& log_density_out, double* score_out,
                          Workspace& ws) const {
  const int K = static_cast<int>(mean_.size());
  const double lambda = schedule_.lambda_unchecked(t);
  const double shrink = std::sqrt(1.0 - lambda);
  const double noise_var = sigma_ * sigma_ * lambda;
  const Eigen::Map<const Eigen::VectorXd> yv(y, dim_);

  double max_log = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    ws.diff = yv - shrink * mean_[k];
    ws.rot.noalias() = basis_[k].transpose() * ws.diff;
    double quad = 0.0;
    double log_det = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double ev = (1.0 - lambda) * eigval_[k][i] + noise_var;
      log_det += std::log(ev);
      ws.scaled[i] = ws.rot[i] / ev;
      quad += ws.rot[i] * ws.scaled[i];
    }
    if (score_out != nullptr) ws.comp_pd.col(k).noalias() = basis_[k] * ws.scaled;
    const double lk = log_weight_[k] - 0.5 * (dim_ * kLog2Pi + log_det) - 0.5 * quad;
    ws.comp_log[k] = lk;
    if (lk > max_log) max_log = lk;
  }
  double sum = 0.0;
  for (int k = 0; k < K; ++k) sum += std::exp(ws.comp_log[k] - max_log);
  log_density_out = max_log + std::log(sum);
  if (score_out != nullptr) {
    Eigen::Map<Eigen::VectorXd> sv(score_out, dim_);
    sv.setZero();
    for (int k = 0; k < K; ++k)
      sv.noalias() -= (std::exp(ws.comp_log[k] - max_log) / sum) * ws.comp_pd.col(k);
  }
}

double MarginalOracle::log_density(const Eigen::VectorXd& y, double t) const {
  Workspace ws = make_workspace();
  double lp;
  eval(y.data(), t, lp, nullptr, ws);
  return lp;
}

Eigen::VectorXd MarginalOracle::score(const Eigen::VectorXd& y, double t) const {
  Workspace ws = make_workspace();
  double lp;
  Eigen::VectorXd s(dim_);
  eval(y.data(), t, lp, s.data(), ws);
  return s;
}

double MarginalOracle::log_density_ratio(const Eigen::VectorXd& y, double t) const {
  const double s2 = sigma_ * sigma_;
  const double log_ref =
      -0.5 * (dim_ * (kLog2Pi + std::log(s2)) + y.squaredNorm() / s2);
  return log_density(y, t) - log_ref;
}

Eigen::VectorXd MarginalOracle::log_ratio_grad(const Eigen::VectorXd& y, double t) const {
  return score(y, t) + y / (sigma_ * sigma_);
}

}  // namespace vpsde
