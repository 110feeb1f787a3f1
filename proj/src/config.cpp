// SPDX-License-Identifier: Apache-2.0
#include "vpsde/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "vpsde/errors.hpp"

namespace vpsde {

namespace {

struct Value {
  enum class Kind { Number, String, Array };
  Kind kind = Kind::Number;
  double num = 0.0;
  std::string str;
  std::vector<Value> arr;
};

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  std::ostringstream oss;
  oss << origin << ":" << line << ": " << msg;
  throw ConfigError(oss.str());
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

Value parse_value(const std::string& raw, const std::string& origin, int line) {
  const std::string s = trim(raw);
  if (s.empty()) fail(origin, line, "empty value");
  Value v;
  if (s.front() == '[') {
    if (s.back() != ']') fail(origin, line, "unterminated array");
    v.kind = Value::Kind::Array;
    const std::string inner = s.substr(1, s.size() - 2);
    int depth = 0;
    std::string item;
    for (char c : inner) {
      if (c == '[') ++depth;
      if (c == ']') --depth;
      if (c == ',' && depth == 0) {
        if (!trim(item).empty()) v.arr.push_back(parse_value(item, origin, line));
        item.clear();
      } else {
        item += c;
      }
    }
    if (depth != 0) fail(origin, line, "unbalanced brackets");
    if (!trim(item).empty()) v.arr.push_back(parse_value(item, origin, line));
    return v;
  }
  char* end = nullptr;
  const double num = std::strtod(s.c_str(), &end);
  if (end != nullptr && *end == '\0') {
    v.kind = Value::Kind::Number;
    v.num = num;
    return v;
  }
  v.kind = Value::Kind::String;
  v.str = s;
  return v;
}

double need_number(const Value& v, const std::string& key, const std::string& origin, int line) {
  if (v.kind != Value::Kind::Number) fail(origin, line, "key '" + key + "' expects a number");
  return v.num;
}

std::string need_string(const Value& v, const std::string& key, const std::string& origin,
                        int line) {
  if (v.kind != Value::Kind::String) fail(origin, line, "key '" + key + "' expects a word");
  return v.str;
}

std::vector<double> need_number_array(const Value& v, const std::string& key,
                                      const std::string& origin, int line) {
  if (v.kind != Value::Kind::Array) fail(origin, line, "key '" + key + "' expects an array");
  std::vector<double> out;
  for (const Value& e : v.arr) out.push_back(need_number(e, key, origin, line));
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const Value&, const std::string&, int)>;

const std::map<std::string, Setter>& global_setters() {
  static const std::map<std::string, Setter> table = {
      {"sigma", [](auto& c, const Value& v, const std::string& o, int l) { c.sigma = need_number(v, "sigma", o, l); }},
      {"schedule", [](auto& c, const Value& v, const std::string& o, int l) { c.schedule = need_string(v, "schedule", o, l); }},
      {"beta", [](auto& c, const Value& v, const std::string& o, int l) { c.beta = need_number(v, "beta", o, l); }},
      {"beta_min", [](auto& c, const Value& v, const std::string& o, int l) { c.beta_min = need_number(v, "beta_min", o, l); }},
      {"beta_max", [](auto& c, const Value& v, const std::string& o, int l) { c.beta_max = need_number(v, "beta_max", o, l); }},
      {"horizon", [](auto& c, const Value& v, const std::string& o, int l) { c.horizon = need_number(v, "horizon", o, l); }},
      {"n_steps", [](auto& c, const Value& v, const std::string& o, int l) { c.n_steps = static_cast<int>(need_number(v, "n_steps", o, l)); }},
      {"n_particles", [](auto& c, const Value& v, const std::string& o, int l) { c.n_particles = static_cast<std::int64_t>(need_number(v, "n_particles", o, l)); }},
      {"cloud_size", [](auto& c, const Value& v, const std::string& o, int l) { c.cloud_size = static_cast<std::int64_t>(need_number(v, "cloud_size", o, l)); }},
      {"ball_radius", [](auto& c, const Value& v, const std::string& o, int l) { c.ball_radius = need_number(v, "ball_radius", o, l); }},
      {"working_ball_margin", [](auto& c, const Value& v, const std::string& o, int l) { c.working_ball_margin = need_number(v, "working_ball_margin", o, l); }},
      {"clip_level", [](auto& c, const Value& v, const std::string& o, int l) { c.clip_level = need_number(v, "clip_level", o, l); }},
      {"regularity_probes", [](auto& c, const Value& v, const std::string& o, int l) { c.regularity_probes = static_cast<int>(need_number(v, "regularity_probes", o, l)); }},
      {"seed", [](auto& c, const Value& v, const std::string& o, int l) { c.seed = static_cast<std::uint64_t>(need_number(v, "seed", o, l)); }},
      {"output_dir", [](auto& c, const Value& v, const std::string& o, int l) { c.output_dir = need_string(v, "output_dir", o, l); }},
      {"verify_metric_trials", [](auto& c, const Value& v, const std::string& o, int l) { c.verify_metric_trials = static_cast<std::int64_t>(need_number(v, "verify_metric_trials", o, l)); }},
      {"verify_envelope_samples", [](auto& c, const Value& v, const std::string& o, int l) { c.verify_envelope_samples = static_cast<std::int64_t>(need_number(v, "verify_envelope_samples", o, l)); }},
      {"verify_l2_pairs", [](auto& c, const Value& v, const std::string& o, int l) { c.verify_l2_pairs = static_cast<int>(need_number(v, "verify_l2_pairs", o, l)); }},
      {"verify_l2_draws", [](auto& c, const Value& v, const std::string& o, int l) { c.verify_l2_draws = static_cast<int>(need_number(v, "verify_l2_draws", o, l)); }},
      {"verify_commutation_probes", [](auto& c, const Value& v, const std::string& o, int l) { c.verify_commutation_probes = static_cast<int>(need_number(v, "verify_commutation_probes", o, l)); }},
      {"cover_epsilons", [](auto& c, const Value& v, const std::string& o, int l) { c.cover_epsilons = need_number_array(v, "cover_epsilons", o, l); }},
      {"cover_resolution", [](auto& c, const Value& v, const std::string& o, int l) { c.cover_resolution = need_number(v, "cover_resolution", o, l); }},
      {"grid_nx", [](auto& c, const Value& v, const std::string& o, int l) { c.grid_nx = static_cast<int>(need_number(v, "grid_nx", o, l)); }},
      {"grid_nt", [](auto& c, const Value& v, const std::string& o, int l) { c.grid_nt = static_cast<int>(need_number(v, "grid_nt", o, l)); }},
      {"grid_t_max", [](auto& c, const Value& v, const std::string& o, int l) { c.grid_t_max = need_number(v, "grid_t_max", o, l); }},
      {"sample_drift", [](auto& c, const Value& v, const std::string& o, int l) { c.sample_drift = need_string(v, "sample_drift", o, l); }},
      {"sample_init", [](auto& c, const Value& v, const std::string& o, int l) { c.sample_init = need_string(v, "sample_init", o, l); }},
      {"kl_drift_a", [](auto& c, const Value& v, const std::string& o, int l) { c.kl_drift_a = need_string(v, "kl_drift_a", o, l); }},
      {"kl_drift_b", [](auto& c, const Value& v, const std::string& o, int l) { c.kl_drift_b = need_string(v, "kl_drift_b", o, l); }},
      {"kl_init", [](auto& c, const Value& v, const std::string& o, int l) { c.kl_init = need_string(v, "kl_init", o, l); }},
      {"mixing_horizons", [](auto& c, const Value& v, const std::string& o, int l) { c.mixing_horizons = need_number_array(v, "mixing_horizons", o, l); }},
      {"mixing_steps_per_unit", [](auto& c, const Value& v, const std::string& o, int l) { c.mixing_steps_per_unit = static_cast<int>(need_number(v, "mixing_steps_per_unit", o, l)); }},
      {"mixing_drift", [](auto& c, const Value& v, const std::string& o, int l) { c.mixing_drift = need_string(v, "mixing_drift", o, l); }},
  };
  return table;
}

void assign_component(ComponentSpec& comp, const std::string& key, const Value& v,
                      const std::string& origin, int line) {
  if (key == "weight") {
    comp.weight = need_number(v, key, origin, line);
  } else if (key == "mean") {
    comp.mean = need_number_array(v, key, origin, line);
  } else if (key == "cov") {
    if (v.kind == Value::Kind::Number) {
      comp.cov_kind = ComponentSpec::CovKind::Scalar;
      comp.cov_scalar = v.num;
    } else if (v.kind == Value::Kind::Array && !v.arr.empty() &&
               v.arr.front().kind == Value::Kind::Number) {
      comp.cov_kind = ComponentSpec::CovKind::Diagonal;
      comp.cov_diag = need_number_array(v, key, origin, line);
    } else if (v.kind == Value::Kind::Array) {
      comp.cov_kind = ComponentSpec::CovKind::Full;
      for (const Value& row : v.arr)
        comp.cov_full.push_back(need_number_array(row, key, origin, line));
    } else {
      fail(origin, line, "key 'cov' expects a scalar, array, or nested array");
    }
  } else {
    fail(origin, line, "unknown key '" + key + "' in component table");
  }
}

void check(bool ok, const std::string& field, const std::string& constraint) {
  if (!ok) throw ConfigError("config validation: field '" + field + "' " + constraint);
}

template <class T>
bool one_of(const T& v, std::initializer_list<T> allowed) {
  for (const auto& a : allowed)
    if (v == a) return true;
  return false;
}

void validate(const ExperimentConfig& c) {
  check(c.sigma > 0.0, "sigma", "must be positive");
  check(one_of<std::string>(c.schedule, {"constant", "linear"}), "schedule",
        "must be 'constant' or 'linear'");
  check(c.beta > 0.0, "beta", "must be positive");
  check(c.beta_min > 0.0, "beta_min", "must be positive");
  check(c.beta_max >= c.beta_min, "beta_max", "must be >= beta_min");
  check(c.horizon > 0.0, "horizon", "must be positive");
  check(c.n_steps >= 10, "n_steps", "must be >= 10");
  check(c.n_particles >= 1, "n_particles", "must be >= 1");
  check(c.cloud_size >= 2, "cloud_size", "must be >= 2");
  check(c.ball_radius > 0.0, "ball_radius", "must be positive");
  check(c.working_ball_margin >= 0.0, "working_ball_margin", "must be nonnegative");
  check(c.clip_level >= 0.0, "clip_level", "must be nonnegative (0 = auto)");
  check(c.regularity_probes >= 1000, "regularity_probes", "must be >= 1000");
  check(c.verify_metric_trials >= 10000, "verify_metric_trials", "must be >= 1e4");
  check(c.verify_envelope_samples >= 100000, "verify_envelope_samples", "must be >= 1e5");
  check(c.verify_l2_pairs >= 1, "verify_l2_pairs", "must be >= 1");
  check(c.verify_l2_draws >= 10000, "verify_l2_draws", "must be >= 1e4");
  check(c.verify_commutation_probes >= 10, "verify_commutation_probes", "must be >= 10");
  check(!c.cover_epsilons.empty(), "cover_epsilons", "must be nonempty");
  for (double e : c.cover_epsilons)
    check(e > 0.0 && e <= 1.0, "cover_epsilons", "entries must lie in (0, 1]");
  check(c.cover_resolution > 0.0, "cover_resolution", "must be positive");
  check(c.grid_nx >= 2, "grid_nx", "must be >= 2");
  check(c.grid_nt >= 2, "grid_nt", "must be >= 2");
  check(c.grid_t_max > 0.0, "grid_t_max", "must be positive");
  check(one_of<std::string>(c.sample_drift, {"oracle", "estimator", "reference"}), "sample_drift",
        "must be oracle | estimator | reference");
  check(one_of<std::string>(c.sample_init, {"reference", "exact_pt"}), "sample_init",
        "must be reference | exact_pt");
  check(one_of<std::string>(c.kl_drift_a, {"oracle", "estimator", "reference"}), "kl_drift_a",
        "must be oracle | estimator | reference");
  check(one_of<std::string>(c.kl_drift_b, {"oracle", "estimator", "reference"}), "kl_drift_b",
        "must be oracle | estimator | reference");
  check(one_of<std::string>(c.kl_init, {"reference", "exact_pt"}), "kl_init",
        "must be reference | exact_pt");
  check(!c.mixing_horizons.empty(), "mixing_horizons", "must be nonempty");
  for (double T : c.mixing_horizons) check(T > 0.0, "mixing_horizons", "entries must be positive");
  check(c.mixing_steps_per_unit >= 10, "mixing_steps_per_unit", "must be >= 10");
  check(one_of<std::string>(c.mixing_drift, {"oracle", "estimator"}), "mixing_drift",
        "must be oracle | estimator");
  check(!c.components.empty(), "component", "at least one [[component]] table is required");
  // Target assembly re-runs every mixture invariant (weights, SPD, dims).
  try {
    (void)c.build_target();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("config validation: target: ") + e.what());
  }
  try {
    (void)c.build_schedule();
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("config validation: schedule: ") + e.what());
  }
}

}  // namespace

int ExperimentConfig::dim() const {
  return components.empty() ? 0 : static_cast<int>(components.front().mean.size());
}

GaussianMixture ExperimentConfig::build_target() const {
  const int d = dim();
  std::vector<GaussianComponent> comps;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const ComponentSpec& spec = components[k];
    GaussianComponent g;
    g.weight = spec.weight;
    g.mean = Eigen::Map<const Eigen::VectorXd>(spec.mean.data(),
                                               static_cast<Eigen::Index>(spec.mean.size()));
    switch (spec.cov_kind) {
      case ComponentSpec::CovKind::Scalar:
        g.cov = spec.cov_scalar * Eigen::MatrixXd::Identity(d, d);
        break;
      case ComponentSpec::CovKind::Diagonal: {
        if (static_cast<int>(spec.cov_diag.size()) != d)
          throw ContractViolation("component cov: diagonal length mismatch");
        g.cov = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < d; ++i) g.cov(i, i) = spec.cov_diag[i];
        break;
      }
      case ComponentSpec::CovKind::Full: {
        if (static_cast<int>(spec.cov_full.size()) != d)
          throw ContractViolation("component cov: row count mismatch");
        g.cov = Eigen::MatrixXd(d, d);
        for (int i = 0; i < d; ++i) {
          if (static_cast<int>(spec.cov_full[i].size()) != d)
            throw ContractViolation("component cov: column count mismatch");
          for (int j = 0; j < d; ++j) g.cov(i, j) = spec.cov_full[i][j];
        }
        break;
      }
    }
    comps.push_back(std::move(g));
  }
  return GaussianMixture(d, std::move(comps));
}

NoiseSchedule ExperimentConfig::build_schedule() const { return build_schedule(horizon); }

NoiseSchedule ExperimentConfig::build_schedule(double horizon_override) const {
  if (schedule == "constant") return NoiseSchedule::constant(beta, horizon_override);
  return NoiseSchedule::linear(beta_min, beta_max, horizon_override);
}

std::vector<std::string> ExperimentConfig::defaulted_keys() const {
  std::vector<std::string> out;
  for (const auto& [key, setter] : global_setters()) {
    (void)setter;
    if (explicit_keys.find(key) == explicit_keys.end()) out.push_back(key);
  }
  return out;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig config;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  bool in_component = false;
  while (std::getline(in, raw)) {
    ++line;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s == "[[component]]") {
      config.components.emplace_back();
      in_component = true;
      continue;
    }
    if (s.front() == '[') fail(origin, line, "unknown table '" + s + "'");
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) fail(origin, line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const Value value = parse_value(s.substr(eq + 1), origin, line);
    if (in_component) {
      assign_component(config.components.back(), key, value, origin, line);
    } else {
      const auto it = global_setters().find(key);
      if (it == global_setters().end()) fail(origin, line, "unknown key '" + key + "'");
      it->second(config, value, origin, line);
      config.explicit_keys.insert(key);
    }
  }
  validate(config);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_override(ExperimentConfig& config, const std::string& key_eq_value) {
  const std::size_t eq = key_eq_value.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must have the form key=value: " + key_eq_value);
  const std::string key = trim(key_eq_value.substr(0, eq));
  const Value value = parse_value(key_eq_value.substr(eq + 1), "<override>", 0);
  const auto it = global_setters().find(key);
  if (it == global_setters().end())
    throw ConfigError("override: unknown key '" + key + "'");
  it->second(config, value, "<override>", 0);
  config.explicit_keys.insert(key);
  validate(config);
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["sigma"] = c.sigma;
  j["schedule"] = c.schedule;
  j["beta"] = c.beta;
  j["beta_min"] = c.beta_min;
  j["beta_max"] = c.beta_max;
  j["horizon"] = c.horizon;
  j["n_steps"] = c.n_steps;
  j["n_particles"] = c.n_particles;
  j["cloud_size"] = c.cloud_size;
  j["ball_radius"] = c.ball_radius;
  j["working_ball_margin"] = c.working_ball_margin;
  j["clip_level"] = c.clip_level;
  j["regularity_probes"] = c.regularity_probes;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["verify_metric_trials"] = c.verify_metric_trials;
  j["verify_envelope_samples"] = c.verify_envelope_samples;
  j["verify_l2_pairs"] = c.verify_l2_pairs;
  j["verify_l2_draws"] = c.verify_l2_draws;
  j["verify_commutation_probes"] = c.verify_commutation_probes;
  j["cover_epsilons"] = c.cover_epsilons;
  j["cover_resolution"] = c.cover_resolution;
  j["grid_nx"] = c.grid_nx;
  j["grid_nt"] = c.grid_nt;
  j["grid_t_max"] = c.grid_t_max;
  j["sample_drift"] = c.sample_drift;
  j["sample_init"] = c.sample_init;
  j["kl_drift_a"] = c.kl_drift_a;
  j["kl_drift_b"] = c.kl_drift_b;
  j["kl_init"] = c.kl_init;
  j["mixing_horizons"] = c.mixing_horizons;
  j["mixing_steps_per_unit"] = c.mixing_steps_per_unit;
  j["mixing_drift"] = c.mixing_drift;
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& comp : c.components) {
    nlohmann::json jc;
    jc["weight"] = comp.weight;
    jc["mean"] = comp.mean;
    switch (comp.cov_kind) {
      case ComponentSpec::CovKind::Scalar:
        jc["cov"] = comp.cov_scalar;
        break;
      case ComponentSpec::CovKind::Diagonal:
        jc["cov"] = comp.cov_diag;
        break;
      case ComponentSpec::CovKind::Full:
        jc["cov"] = comp.cov_full;
        break;
    }
    comps.push_back(jc);
  }
  j["components"] = comps;
  return j;
}

}  // namespace vpsde
