// SPDX-License-Identifier: Apache-2.0
#include "vpsde/mixture.hpp"

#include <cmath>
#include <sstream>

#include "vpsde/errors.hpp"

namespace vpsde {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kMinWeight = 1e-12;
}  // namespace

GaussianMixture::GaussianMixture(int dim, std::vector<GaussianComponent> components)
    : dim_(dim), comps_(std::move(components)) {
  if (dim_ <= 0) throw ContractViolation("GaussianMixture: dim must be positive");
  if (comps_.empty()) throw ContractViolation("GaussianMixture: needs at least one component");

  double wsum = 0.0;
  for (std::size_t k = 0; k < comps_.size(); ++k) {
    const auto& c = comps_[k];
    std::ostringstream tag;
    tag << "GaussianMixture component " << k;
    if (c.weight < kMinWeight)
      throw ContractViolation(tag.str() + ": weight below 1e-12 (degenerate)");
    if (c.weight > 1.0 + 1e-12) throw ContractViolation(tag.str() + ": weight exceeds 1");
    if (c.mean.size() != dim_) throw ContractViolation(tag.str() + ": mean dimension mismatch");
    if (c.cov.rows() != dim_ || c.cov.cols() != dim_)
      throw ContractViolation(tag.str() + ": covariance dimension mismatch");
    const double asym = (c.cov - c.cov.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * (1.0 + c.cov.cwiseAbs().maxCoeff()))
      throw ContractViolation(tag.str() + ": covariance not symmetric");
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-12)
    throw ContractViolation("GaussianMixture: weights must sum to 1 within 1e-12");

  precision_.reserve(comps_.size());
  chol_.reserve(comps_.size());
  log_norm_.reserve(comps_.size());
  for (std::size_t k = 0; k < comps_.size(); ++k) {
    Eigen::MatrixXd cov = 0.5 * (comps_[k].cov + comps_[k].cov.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      std::ostringstream oss;
      oss << "GaussianMixture component " << k << ": covariance not positive definite";
      throw ContractViolation(oss.str());
    }
    const Eigen::MatrixXd L = llt.matrixL();
    double log_det = 0.0;
    for (int i = 0; i < dim_; ++i) log_det += 2.0 * std::log(L(i, i));
    precision_.push_back(llt.solve(Eigen::MatrixXd::Identity(dim_, dim_)));
    chol_.push_back(L);
    log_norm_.push_back(std::log(comps_[k].weight) - 0.5 * (dim_ * kLog2Pi + log_det));
  }
}

GaussianMixture GaussianMixture::single(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  return GaussianMixture(static_cast<int>(mean.size()), {{1.0, mean, cov}});
}

GaussianMixture GaussianMixture::isotropic(const Eigen::VectorXd& mean, double s2) {
  const int d = static_cast<int>(mean.size());
  return single(mean, s2 * Eigen::MatrixXd::Identity(d, d));
}

MixtureWorkspace GaussianMixture::make_workspace() const {
  MixtureWorkspace ws;
  ws.diff.resize(dim_);
  ws.pdiff.resize(dim_);
  ws.comp_log.resize(component_count());
  ws.comp_pd.resize(dim_, component_count());
  return ws;
}

void GaussianMixture::eval(const double* x, double& log_density_out, double* score_out,
                           MixtureWorkspace& ws) const {
  const int K = component_count();
  const Eigen::Map<const Eigen::VectorXd> xv(x, dim_);
  double max_log = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    ws.diff = xv - comps_[k].mean;
    ws.comp_pd.col(k).noalias() = precision_[k] * ws.diff;
    const double quad = ws.diff.dot(ws.comp_pd.col(k));
    const double lk = log_norm_[k] - 0.5 * quad;
    ws.comp_log[k] = lk;
    if (lk > max_log) max_log = lk;
  }
  double sum = 0.0;
  for (int k = 0; k < K; ++k) sum += std::exp(ws.comp_log[k] - max_log);
  log_density_out = max_log + std::log(sum);
  if (score_out != nullptr) {
    Eigen::Map<Eigen::VectorXd> sv(score_out, dim_);
    sv.setZero();
    for (int k = 0; k < K; ++k) {
      const double resp = std::exp(ws.comp_log[k] - max_log) / sum;
      sv.noalias() -= resp * ws.comp_pd.col(k);
    }
  }
}

double GaussianMixture::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) {
    std::ostringstream oss;
    oss << "GaussianMixture::log_density: x has length " << x.size() << ", expected " << dim_;
    throw ContractViolation(oss.str());
  }
  MixtureWorkspace ws = make_workspace();
  double lp;
  eval(x.data(), lp, nullptr, ws);
  return lp;
}

Eigen::VectorXd GaussianMixture::score(const Eigen::VectorXd& x) const {
  if (x.size() != dim_)
    throw ContractViolation("GaussianMixture::score: dimension mismatch");
  MixtureWorkspace ws = make_workspace();
  double lp;
  Eigen::VectorXd s(dim_);
  eval(x.data(), lp, s.data(), ws);
  return s;
}

GaussianMixture GaussianMixture::marginal_at(const NoiseSchedule& schedule, double sigma,
                                             double t) const {
  if (!(t >= 0.0)) throw ContractViolation("marginal_at: t must be nonnegative");
  const double lambda = schedule.lambda_unchecked(t);
  const double shrink = std::sqrt(1.0 - lambda);  // = exp(-int_0^t beta)
  std::vector<GaussianComponent> out;
  out.reserve(comps_.size());
  const Eigen::MatrixXd noise =
      sigma * sigma * lambda * Eigen::MatrixXd::Identity(dim_, dim_);
  for (const auto& c : comps_) {
    out.push_back({c.weight, shrink * c.mean, (1.0 - lambda) * c.cov + noise});
  }
  return GaussianMixture(dim_, std::move(out));
}

Eigen::VectorXd GaussianMixture::sample(Rng& rng) const {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t pick = comps_.size() - 1;
  for (std::size_t k = 0; k < comps_.size(); ++k) {
    acc += comps_[k].weight;
    if (u <= acc) {
      pick = k;
      break;
    }
  }
  return comps_[pick].mean + chol_[pick] * rng.normal_vec(dim_);
}

Eigen::VectorXd GaussianMixture::mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(dim_);
  for (const auto& c : comps_) m += c.weight * c.mean;
  return m;
}

Eigen::MatrixXd GaussianMixture::covariance() const {
  const Eigen::VectorXd m = mean();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim_, dim_);
  for (const auto& c : comps_)
    cov += c.weight * (c.cov + (c.mean - m) * (c.mean - m).transpose());
  return cov;
}

Eigen::VectorXd oracle_score(const GaussianMixture& target, const NoiseSchedule& schedule,
                             double sigma, double t, const Eigen::VectorXd& y) {
  return target.marginal_at(schedule, sigma, t).score(y);
}

}  // namespace vpsde
