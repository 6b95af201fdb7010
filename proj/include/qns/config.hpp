// Experiment configuration: strict JSON loading (unknown keys rejected,
// offending key paths named), frequency units converted exactly here
// (config carries ordinary frequencies in Hz; everything downstream is
// angular, rad/s).
#pragma once

#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "qns/measurement.hpp"
#include "qns/targets.hpp"

namespace qns {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct AnalysisConfig {
  int max_p = 24;
  int max_q = 24;
  int zero_pad_factor = 4;
  long bootstrap_block = 0; // 0 -> 4 (max_p + max_q)
  int bootstrap_resamples = 200;
  bool cell_errors = true;   // per-cell block-bootstrap standard errors
  bool from_photons = false; // analyze the photon channel when counts exist
};

struct ExperimentConfig {
  TargetModel target;
  ShotConfig shot;
  std::optional<ReadoutModel> readout;
  AnalysisConfig analysis;
  long trajectories = 1;
  std::uint64_t seed = 1;
  int workers = 1;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j,
                           std::initializer_list<const char*> known,
                           const std::string& path) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw ConfigError("unknown key '" + path + "." + it.key() + "'");
  }
}

template <typename T>
T require(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.contains(key))
    throw ConfigError("missing key '" + path + "." + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("key '" + path + "." + key + "' has the wrong type");
  }
}

template <typename T>
T optional_or(const nlohmann::json& j, const char* key,
              const std::string& path, T fallback) {
  if (!j.contains(key))
    return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("key '" + path + "." + key + "' has the wrong type");
  }
}

inline constexpr double two_pi = 2.0 * std::numbers::pi;

} // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using namespace detail;
  ExperimentConfig cfg;
  reject_unknown(j,
                 {"target", "shot", "readout", "analysis", "trajectories",
                  "seed", "workers"},
                 "config");

  if (!j.contains("target"))
    throw ConfigError("missing key 'config.target'");
  {
    const auto& t = j.at("target");
    reject_unknown(t,
                   {"kind", "nu0_hz", "gamma_per_s", "sigma_q_hz", "b0_hz",
                    "n_spins", "a_perp_hz", "a_x_hz", "gamma_extra_per_s"},
                   "target");
    const std::string kind = require<std::string>(t, "kind", "target");
    const double nu0 = two_pi * require<double>(t, "nu0_hz", "target");
    const double gamma = optional_or<double>(t, "gamma_per_s", "target", 0.0);
    try {
      if (kind == "gaussian_quadrature") {
        cfg.target = TargetModel::gaussian(
            nu0, two_pi * require<double>(t, "sigma_q_hz", "target"), gamma);
      } else if (kind == "random_phase_ac") {
        cfg.target = TargetModel::random_phase_ac(
            nu0, two_pi * require<double>(t, "b0_hz", "target"));
        cfg.target.gamma = gamma;
      } else if (kind == "quantum_spins") {
        const int n = require<int>(t, "n_spins", "target");
        const double gex =
            optional_or<double>(t, "gamma_extra_per_s", "target", 0.0);
        if (t.contains("a_x_hz") && t.contains("a_perp_hz"))
          throw ConfigError(
              "target: give either 'a_perp_hz' or 'a_x_hz', not both");
        if (t.contains("a_x_hz"))
          cfg.target = TargetModel::quantum_spins_from_ax(
              nu0, n, two_pi * require<double>(t, "a_x_hz", "target"), gamma,
              gex);
        else
          cfg.target = TargetModel::quantum_spins(
              nu0, n, two_pi * require<double>(t, "a_perp_hz", "target"),
              gamma, gex);
      } else {
        throw ConfigError("target.kind '" + kind + "' is not one of "
                          "gaussian_quadrature|random_phase_ac|quantum_spins");
      }
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("target: ") + e.what());
    }
  }

  if (!j.contains("shot"))
    throw ConfigError("missing key 'config.shot'");
  {
    const auto& s = j.at("shot");
    reject_unknown(s, {"theta_deg", "tau_s", "t_c_s", "n_shots", "t0_s"},
                   "shot");
    cfg.shot.theta =
        require<double>(s, "theta_deg", "shot") * std::numbers::pi / 180.0;
    cfg.shot.tau = require<double>(s, "tau_s", "shot");
    cfg.shot.t_c = require<double>(s, "t_c_s", "shot");
    cfg.shot.n_shots = require<long>(s, "n_shots", "shot");
    cfg.shot.t0 = optional_or<double>(s, "t0_s", "shot", 0.0);
    try {
      cfg.shot.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("shot: ") + e.what());
    }
  }

  if (j.contains("readout")) {
    const auto& r = j.at("readout");
    reject_unknown(r, {"n_plus", "n_minus"}, "readout");
    ReadoutModel ro;
    ro.n_plus = require<double>(r, "n_plus", "readout");
    ro.n_minus = require<double>(r, "n_minus", "readout");
    try {
      ro.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("readout: ") + e.what());
    }
    cfg.readout = ro;
  }

  if (j.contains("analysis")) {
    const auto& a = j.at("analysis");
    reject_unknown(a,
                   {"max_p", "max_q", "zero_pad_factor", "bootstrap_block",
                    "bootstrap_resamples", "cell_errors", "from_photons"},
                   "analysis");
    cfg.analysis.max_p = optional_or<int>(a, "max_p", "analysis", 24);
    cfg.analysis.max_q = optional_or<int>(a, "max_q", "analysis", 24);
    cfg.analysis.zero_pad_factor =
        optional_or<int>(a, "zero_pad_factor", "analysis", 4);
    cfg.analysis.bootstrap_block =
        optional_or<long>(a, "bootstrap_block", "analysis", 0);
    cfg.analysis.bootstrap_resamples =
        optional_or<int>(a, "bootstrap_resamples", "analysis", 200);
    cfg.analysis.cell_errors =
        optional_or<bool>(a, "cell_errors", "analysis", true);
    cfg.analysis.from_photons =
        optional_or<bool>(a, "from_photons", "analysis", false);
    if (cfg.analysis.max_p < 1 || cfg.analysis.max_q < 1)
      throw ConfigError("analysis: max_p and max_q must be >= 1");
    if (cfg.analysis.zero_pad_factor < 1)
      throw ConfigError("analysis: zero_pad_factor must be >= 1");
    if (cfg.analysis.bootstrap_resamples < 2)
      throw ConfigError("analysis: bootstrap_resamples must be >= 2");
  }

  cfg.trajectories = optional_or<long>(j, "trajectories", "config", 1);
  if (cfg.trajectories < 1)
    throw ConfigError("config: trajectories must be >= 1");
  cfg.seed = optional_or<std::uint64_t>(j, "seed", "config", 1);
  cfg.workers = optional_or<int>(j, "workers", "config", 1);
  if (cfg.workers < 1)
    throw ConfigError("config: workers must be >= 1");

  if (cfg.shot.n_shots < cfg.analysis.max_p + cfg.analysis.max_q + 1)
    throw ConfigError("shot.n_shots must exceed analysis.max_p + max_q");
  return cfg;
}

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  using namespace detail;
  nlohmann::json t;
  switch (cfg.target.kind) {
  case TargetKind::gaussian_quadrature:
    t = {{"kind", "gaussian_quadrature"},
         {"nu0_hz", cfg.target.nu0 / two_pi},
         {"gamma_per_s", cfg.target.gamma},
         {"sigma_q_hz", cfg.target.sigma_q / two_pi}};
    break;
  case TargetKind::random_phase_ac:
    t = {{"kind", "random_phase_ac"},
         {"nu0_hz", cfg.target.nu0 / two_pi},
         {"gamma_per_s", cfg.target.gamma},
         {"b0_hz", cfg.target.b0 / two_pi}};
    break;
  case TargetKind::quantum_spins:
    t = {{"kind", "quantum_spins"},
         {"nu0_hz", cfg.target.nu0 / two_pi},
         {"gamma_per_s", cfg.target.gamma},
         {"n_spins", cfg.target.n_spins},
         {"a_perp_hz", cfg.target.a_perp / two_pi},
         {"gamma_extra_per_s", cfg.target.gamma_extra}};
    break;
  }
  nlohmann::json j = {
      {"target", t},
      {"shot",
       {{"theta_deg", cfg.shot.theta * 180.0 / std::numbers::pi},
        {"tau_s", cfg.shot.tau},
        {"t_c_s", cfg.shot.t_c},
        {"n_shots", cfg.shot.n_shots},
        {"t0_s", cfg.shot.t0}}},
      {"analysis",
       {{"max_p", cfg.analysis.max_p},
        {"max_q", cfg.analysis.max_q},
        {"zero_pad_factor", cfg.analysis.zero_pad_factor},
        {"bootstrap_block", cfg.analysis.bootstrap_block},
        {"bootstrap_resamples", cfg.analysis.bootstrap_resamples},
        {"cell_errors", cfg.analysis.cell_errors},
        {"from_photons", cfg.analysis.from_photons}}},
      {"trajectories", cfg.trajectories},
      {"seed", cfg.seed},
      {"workers", cfg.workers}};
  if (cfg.readout)
    j["readout"] = {{"n_plus", cfg.readout->n_plus},
                    {"n_minus", cfg.readout->n_minus}};
  return j;
}

// FNV-1a over the canonical dump; stamped into every output for provenance.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string s = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace qns
