// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "vpsde/mixture.hpp"
#include "vpsde/schedule.hpp"

#include "json.hpp"

namespace vpsde {

// One target component as written in the config file. cov accepts a scalar
// (isotropic), a flat array (diagonal) or a nested array (full matrix).
struct ComponentSpec {
  double weight = 1.0;
  std::vector<double> mean;
  enum class CovKind { Scalar, Diagonal, Full } cov_kind = CovKind::Scalar;
  double cov_scalar = 1.0;
  std::vector<double> cov_diag;
  std::vector<std::vector<double>> cov_full;
};

// Everything an experiment needs, in one validated place. Field defaults are
// the effective values when the config file omits the key; defaulted keys are
// echoed in the run manifest.
struct ExperimentConfig {
  std::vector<ComponentSpec> components;

  double sigma = 1.0;
  std::string schedule = "constant";  // constant | linear
  double beta = 1.0;
  double beta_min = 0.1;
  double beta_max = 1.0;
  double horizon = 4.0;
  int n_steps = 400;
  std::int64_t n_particles = 10000;
  std::int64_t cloud_size = 100000;
  double ball_radius = 1.0;
  // The regularity constants must hold wherever semigroup arguments land,
  // which is the verification ball inflated by the reach of the Gaussian
  // noise; the margin sizes that inflation.
  double working_ball_margin = 7.0;
  double clip_level = 0.0;  // 0 = auto (2 L / c)
  int regularity_probes = 4096;
  std::uint64_t seed = 20240601;
  std::string output_dir = "out";

  // verify
  std::int64_t verify_metric_trials = 100000;
  std::int64_t verify_envelope_samples = 1000000;
  int verify_l2_pairs = 200;
  int verify_l2_draws = 10000;
  int verify_commutation_probes = 50;

  // covering
  std::vector<double> cover_epsilons = {0.3, 0.5, 0.8};
  double cover_resolution = 0.01;

  // score-error grid
  int grid_nx = 21;
  int grid_nt = 21;
  double grid_t_max = 1.0;

  // sample
  std::string sample_drift = "oracle";     // oracle | estimator | reference
  std::string sample_init = "reference";   // reference | exact_pt

  // kl
  std::string kl_drift_a = "oracle";
  std::string kl_drift_b = "estimator";
  std::string kl_init = "exact_pt";

  // mixing
  std::vector<double> mixing_horizons = {1.0, 2.0, 4.0};
  int mixing_steps_per_unit = 200;
  std::string mixing_drift = "oracle";

  std::set<std::string> explicit_keys;  // keys present in the file or overrides

  int dim() const;
  GaussianMixture build_target() const;
  NoiseSchedule build_schedule() const;
  NoiseSchedule build_schedule(double horizon_override) const;
  std::vector<std::string> defaulted_keys() const;
};

// Parses and validates the documented flat key = value format with
// [[component]] tables. Throws ConfigError with a line number on parse
// failures and with the offending field name on validation failures.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

// Applies a single "key=value" override (same value grammar as the file).
void apply_override(ExperimentConfig& config, const std::string& key_eq_value);

// Full echo of effective values (components included) for the run manifest.
nlohmann::json config_to_json(const ExperimentConfig& config);

}  // namespace vpsde
