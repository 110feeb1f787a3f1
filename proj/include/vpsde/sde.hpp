// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "vpsde/mixture.hpp"
#include "vpsde/oracle.hpp"
#include "vpsde/schedule.hpp"
#include "vpsde/semigroup.hpp"

namespace vpsde {

// Reverse-time drift field b(y, t_rev) of
//   dy = b(y, t_rev) dt + sigma sqrt(2 beta_{T - t_rev}) dW,   t_rev in [0, T].
// All drifts take reverse time and convert to forward time internally, so the
// direction convention lives in exactly one place. eval() must be safe to call
// concurrently; per-caller scratch comes from make_scratch().
class DriftField {
 public:
  struct Scratch {
    virtual ~Scratch() = default;
  };

  virtual ~DriftField() = default;
  virtual int dim() const = 0;
  virtual std::unique_ptr<Scratch> make_scratch() const { return nullptr; }
  virtual void eval(const double* y, double t_rev, double* out, Scratch* scratch) const = 0;

  Eigen::VectorXd operator()(const Eigen::VectorXd& y, double t_rev) const;
};

// b = -beta_{T-t} y: time reversal of the stationary reference process.
std::unique_ptr<DriftField> make_reference_drift(const NoiseSchedule& schedule, int dim);

// b = beta_{T-t} (y + 2 sigma^2 grad log p_{T-t}(y)), score from the closed
// form mixture marginal.
std::unique_ptr<DriftField> make_oracle_score_drift(const GaussianMixture& target,
                                                    const NoiseSchedule& schedule, double sigma);

// b = -beta_{T-t} (y - 2 sigma^2 grad log U_{T-t} f(y)), the same drift in
// value-function form (oracle semigroup). Equal to the score form up to
// floating point; kept separate so the equality is testable.
std::unique_ptr<DriftField> make_value_function_drift(const GaussianMixture& target,
                                                      const NoiseSchedule& schedule, double sigma);

// b = beta_{T-t} (y + 2 sigma^2 s_hat(y, T-t)) with s_hat the clipped
// empirical-semigroup score.
std::unique_ptr<DriftField> make_estimator_drift(std::shared_ptr<const SemigroupEstimator> est);

// Arbitrary reverse-time field (tests, perturbations). fn must be pure.
std::unique_ptr<DriftField> make_custom_drift(
    int dim, std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> fn);

// One exact draw from the forward transition kernel
// N(sqrt(1-lambda_t) x0, sigma^2 lambda_t I); no discretization.
Eigen::VectorXd forward_sample(const NoiseSchedule& schedule, double sigma,
                               const Eigen::VectorXd& x0, double t, std::uint64_t seed);

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::uint64_t seed = 0;
};

enum class InitKind { ReferenceGaussian, ExactPT };

struct InitialCondition {
  InitKind kind = InitKind::ReferenceGaussian;
  const GaussianMixture* target = nullptr;  // required for ExactPT

  static InitialCondition reference() { return {InitKind::ReferenceGaussian, nullptr}; }
  static InitialCondition exact_pt(const GaussianMixture& target) {
    return {InitKind::ExactPT, &target};
  }
};

struct SimulateOptions {
  int n_steps = 100;
  std::int64_t n_particles = 1;
  std::uint64_t seed = 0;
  bool record_paths = false;
};

struct SimResult {
  RowMajorMatrix samples;           // n_particles x d, terminal states
  std::vector<Trajectory> paths;    // filled only when record_paths
};

// Euler-Maruyama on the uniform reverse-time grid:
//   y_{k+1} = y_k + b(y_k, t_k) dt + sigma sqrt(2 beta_{T-t_k} dt) xi_k.
// Particles are independent with derived per-particle seeds, so results are
// bitwise identical regardless of scheduling.
SimResult simulate_reverse(const NoiseSchedule& schedule, double sigma, const DriftField& drift,
                           const InitialCondition& init, const SimulateOptions& opts);

}  // namespace vpsde
