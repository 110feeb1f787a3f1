// SPDX-License-Identifier: Apache-2.0
#include "vpsde/radon_nikodym.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vpsde/errors.hpp"
#include "vpsde/rng.hpp"

namespace vpsde {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kMaxLog = 700.0;
constexpr double kMinLog = -700.0;

// Root of x^{d+1} = x + 1 (generalized golden ratio), the standard generator
// of a d-dimensional Kronecker sequence.
double kronecker_base(int d) {
  double x = 1.5;
  for (int it = 0; it < 64; ++it) x = std::pow(1.0 + x, 1.0 / (d + 1));
  return x;
}

std::string format_point(const double* x, int d) {
  std::ostringstream oss;
  oss << "(";
  for (int i = 0; i < d; ++i) oss << (i ? ", " : "") << x[i];
  oss << ")";
  return oss.str();
}

}  // namespace

std::vector<Eigen::VectorXd> ball_probe_points(int dim, double radius, int count,
                                               std::uint64_t seed) {
  const double base = kronecker_base(dim);
  std::vector<double> alpha(dim);
  double inv = 1.0;
  for (int i = 0; i < dim; ++i) {
    inv /= base;
    alpha[i] = inv;
  }
  std::uint64_t s = seed;
  std::vector<double> u(dim);
  for (int i = 0; i < dim; ++i)
    u[i] = static_cast<double>(splitmix64(s) >> 11) * 0x1p-53;

  std::vector<Eigen::VectorXd> pts;
  pts.reserve(count);
  const long max_iters = 64L * count + 1024;
  Eigen::VectorXd p(dim);
  for (long k = 0; k < max_iters && static_cast<int>(pts.size()) < count; ++k) {
    double norm2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      u[i] += alpha[i];
      u[i] -= std::floor(u[i]);
      p[i] = (2.0 * u[i] - 1.0) * radius;
      norm2 += p[i] * p[i];
    }
    if (norm2 <= radius * radius) pts.push_back(p);
  }
  // Rejection from the cube gets inefficient in high dimension; fill the
  // remainder by radial projection so the probe always reaches `count`.
  while (static_cast<int>(pts.size()) < count) {
    double norm2 = 0.0;
    for (int i = 0; i < dim; ++i) {
      u[i] += alpha[i];
      u[i] -= std::floor(u[i]);
      p[i] = 2.0 * u[i] - 1.0;
      norm2 += p[i] * p[i];
    }
    const double norm = std::sqrt(norm2);
    const double shell = std::pow(0.05 + 0.9 * (u[0]), 1.0 / dim);
    pts.push_back(p * (radius * shell / (norm > 0 ? norm : 1.0)));
  }
  return pts;
}

RadonNikodym::RadonNikodym(GaussianMixture target, double sigma, double lipschitz,
                           double lower_bound, double ball_radius)
    : target_(std::move(target)),
      sigma_(sigma),
      lipschitz_(lipschitz),
      lower_bound_(lower_bound),
      ball_radius_(ball_radius) {
  if (!(sigma > 0.0)) throw ContractViolation("RadonNikodym: sigma must be positive");
  if (!(lipschitz > 0.0)) throw ContractViolation("RadonNikodym: L must be positive");
  if (!(lower_bound > 0.0) || lower_bound > 1.0)
    throw ContractViolation("RadonNikodym: c must lie in (0, 1]");
  if (!(ball_radius > 0.0)) throw ContractViolation("RadonNikodym: ball_radius must be positive");

  // Invariant probe: f >= c - 1e-9 on the working ball, difference quotients
  // of f and grad f bounded by L + 1e-6.
  const int n_probe = 512;
  const auto pts = ball_probe_points(dim(), ball_radius_, n_probe, 0x5eedULL);
  Workspace ws = make_workspace();
  std::vector<double> vals(n_probe);
  std::vector<Eigen::VectorXd> grads(n_probe);
  for (int i = 0; i < n_probe; ++i) {
    grads[i].resize(dim());
    eval(pts[i].data(), vals[i], grads[i].data(), ws);
    if (vals[i] < lower_bound_ - 1e-9) {
      std::ostringstream oss;
      oss << "RadonNikodym: f = " << vals[i] << " < c = " << lower_bound_ << " at "
          << format_point(pts[i].data(), dim());
      throw ContractViolation(oss.str());
    }
  }
  for (int i = 0; i + 1 < n_probe; ++i) {
    const double dist = (pts[i] - pts[i + 1]).norm();
    if (dist < 1e-10) continue;
    const double qf = std::abs(vals[i] - vals[i + 1]) / dist;
    const double qg = (grads[i] - grads[i + 1]).norm() / dist;
    if (std::max(qf, qg) > lipschitz_ + 1e-6) {
      std::ostringstream oss;
      oss << "RadonNikodym: empirical Lipschitz ratio " << std::max(qf, qg) << " exceeds L = "
          << lipschitz_ << " near " << format_point(pts[i].data(), dim());
      throw ContractViolation(oss.str());
    }
  }
}

RadonNikodym RadonNikodym::with_estimated_constants(GaussianMixture target, double sigma,
                                                    double ball_radius, int probe_count,
                                                    std::uint64_t seed) {
  auto [L, c] = estimate_regularity(target, sigma, ball_radius, probe_count, seed);
  return RadonNikodym(std::move(target), sigma, L, c, ball_radius);
}

RadonNikodym::Workspace RadonNikodym::make_workspace() const {
  Workspace ws;
  ws.mix = target_.make_workspace();
  ws.score.resize(target_.dim());
  return ws;
}

void RadonNikodym::eval(const double* x, double& value_out, double* grad_out,
                        Workspace& ws) const {
  const int d = target_.dim();
  double log_pi;
  target_.eval(x, log_pi, grad_out != nullptr ? ws.score.data() : nullptr, ws.mix);
  const double s2 = sigma_ * sigma_;
  double sq = 0.0;
  for (int i = 0; i < d; ++i) sq += x[i] * x[i];
  const double log_ref = -0.5 * (d * (kLog2Pi + std::log(s2)) + sq / s2);
  const double log_f = log_pi - log_ref;
  if (log_f > kMaxLog || log_f < kMinLog) {
    std::ostringstream oss;
    oss << "RadonNikodym: log f = " << log_f << " out of range at x = " << format_point(x, d);
    throw NumericError(oss.str());
  }
  value_out = std::exp(log_f);
  if (grad_out != nullptr) {
    for (int i = 0; i < d; ++i) grad_out[i] = value_out * (ws.score[i] + x[i] / s2);
  }
}

RadonNikodym::Eval RadonNikodym::operator()(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw ContractViolation("RadonNikodym: dimension mismatch");
  Workspace ws = make_workspace();
  Eval e;
  e.grad.resize(dim());
  eval(x.data(), e.value, e.grad.data(), ws);
  return e;
}

double RadonNikodym::value(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) throw ContractViolation("RadonNikodym: dimension mismatch");
  Workspace ws = make_workspace();
  double v;
  eval(x.data(), v, nullptr, ws);
  return v;
}

std::pair<double, double> estimate_regularity(const GaussianMixture& target, double sigma,
                                              double ball_radius, int probe_count,
                                              std::uint64_t seed) {
  if (probe_count < 1000)
    throw ContractViolation("estimate_regularity: probe_count must be >= 1000");
  // Unvalidated ratio: constants here are placeholders, only eval() is used.
  RadonNikodym::Workspace ws;
  ws.mix = target.make_workspace();
  ws.score.resize(target.dim());
  const double s2 = sigma * sigma;
  const int d = target.dim();

  auto eval_at = [&](const Eigen::VectorXd& p, double& val, Eigen::VectorXd& grad) {
    double log_pi;
    target.eval(p.data(), log_pi, ws.score.data(), ws.mix);
    const double log_ref = -0.5 * (d * (kLog2Pi + std::log(s2)) + p.squaredNorm() / s2);
    val = std::exp(log_pi - log_ref);
    grad = val * (ws.score + p / s2);
  };

  const auto pts = ball_probe_points(d, ball_radius, probe_count, seed);
  std::vector<double> vals(probe_count);
  std::vector<Eigen::VectorXd> grads(probe_count);
  double min_f = std::numeric_limits<double>::infinity();
  double max_quot = 0.0;
  for (int i = 0; i < probe_count; ++i) {
    eval_at(pts[i], vals[i], grads[i]);
    min_f = std::min(min_f, vals[i]);
    // sup ||grad f|| is the limiting difference quotient of f
    max_quot = std::max(max_quot, grads[i].norm());
  }

  // Difference quotients over close pairs: each probe paired with a small
  // offset (cycling axis directions, then the local gradient direction) to
  // capture the local quotients of f and grad f; plus the consecutive
  // sequence pairs for long-range secants.
  const double h = 1e-3 * ball_radius;
  double qval;
  Eigen::VectorXd qgrad(d), partner(d), dir(d);
  for (int i = 0; i < probe_count; ++i) {
    dir.setZero();
    if (i % (d + 1) < d) {
      dir[i % (d + 1)] = 1.0;
    } else if (grads[i].norm() > 1e-12) {
      dir = grads[i].normalized();
    } else {
      dir[0] = 1.0;
    }
    partner = pts[i] - h * dir;  // inward-leaning keeps the pair inside the ball
    if (partner.norm() > ball_radius) partner = pts[i] + h * dir;
    eval_at(partner, qval, qgrad);
    max_quot = std::max(max_quot, std::abs(vals[i] - qval) / h);
    max_quot = std::max(max_quot, (grads[i] - qgrad).norm() / h);
  }
  for (int i = 0; i + 1 < probe_count; ++i) {
    const double dist = (pts[i] - pts[i + 1]).norm();
    if (dist < 1e-10) continue;
    max_quot = std::max(max_quot, std::abs(vals[i] - vals[i + 1]) / dist);
    max_quot = std::max(max_quot, (grads[i] - grads[i + 1]).norm() / dist);
  }

  const double c = std::min(1.0, std::max(1e-12, 0.9 * min_f));
  const double L = std::max(1e-9, 1.1 * max_quot);
  return {L, c};
}

}  // namespace vpsde
