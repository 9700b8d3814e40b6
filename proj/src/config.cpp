#include "netmoe/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "netmoe/errors.hpp"
#include "netmoe/rng.hpp"

namespace netmoe {

double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }

double watts_to_dbm(double watts) { return 10.0 * std::log10(watts * 1000.0); }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

SystemConfig SystemConfig::defaults() { return SystemConfig{}; }

namespace {

// Reads `key`, or converts `alt` (dBm/dB form) when only that is present.
void read_power(const nlohmann::json& j, const char* key, const char* alt,
                double& out) {
  if (j.contains(key)) {
    out = j.at(key).get<double>();
  } else if (j.contains(alt)) {
    out = dbm_to_watts(j.at(alt).get<double>());
  }
}

void read_plain(const nlohmann::json& j, const char* key, double& out) {
  if (j.contains(key)) out = j.at(key).get<double>();
}

void read_plain(const nlohmann::json& j, const char* key, int& out) {
  if (j.contains(key)) out = j.at(key).get<int>();
}

}  // namespace

SystemConfig SystemConfig::from_json(const nlohmann::json& j) {
  SystemConfig c;
  read_plain(j, "num_antennas", c.num_antennas);
  read_plain(j, "num_users", c.num_users);
  read_power(j, "p_max", "p_max_dbm", c.p_max);
  // Single-domain budgets default to the shared one unless given explicitly.
  c.p_max_tx = c.p_max;
  c.p_max_co = c.p_max;
  read_power(j, "p_max_tx", "p_max_tx_dbm", c.p_max_tx);
  read_power(j, "p_max_co", "p_max_co_dbm", c.p_max_co);
  read_plain(j, "bandwidth", c.bandwidth);
  if (j.contains("noise_psd")) {
    c.noise_psd = j.at("noise_psd").get<double>();
  } else if (j.contains("noise_psd_dbm_per_hz")) {
    c.noise_psd = dbm_to_watts(j.at("noise_psd_dbm_per_hz").get<double>());
  }
  if (j.contains("sinr_gap")) {
    c.sinr_gap = j.at("sinr_gap").get<double>();
  } else if (j.contains("sinr_gap_db")) {
    c.sinr_gap = db_to_linear(j.at("sinr_gap_db").get<double>());
  }
  read_plain(j, "f_max", c.f_max);
  read_plain(j, "tau", c.tau);
  read_plain(j, "mu", c.mu);
  read_plain(j, "d_out", c.d_out);
  read_plain(j, "d_in", c.d_in);
  read_plain(j, "sigma_h_sq", c.sigma_h_sq);
  read_plain(j, "sigma_omega_sq", c.sigma_omega_sq);
  if (j.contains("sigma_w_sq")) c.sigma_omega_sq = j.at("sigma_w_sq").get<double>();
  read_plain(j, "omega_shape", c.omega_shape);
  read_plain(j, "omega_scale", c.omega_scale);
  read_plain(j, "omega_floor", c.omega_floor);
  read_plain(j, "gamma", c.quantile_gamma);
  read_plain(j, "m_samples", c.m_samples);
  read_plain(j, "rzf_alpha", c.rzf_alpha);
  read_plain(j, "t_feas", c.t_feas);
  c.validate();
  return c;
}

SystemConfig SystemConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config field error in " + path + ": " + e.what());
  }
}

nlohmann::json SystemConfig::to_json() const {
  nlohmann::ordered_json j;
  j["num_antennas"] = num_antennas;
  j["num_users"] = num_users;
  j["p_max"] = p_max;
  j["p_max_tx"] = p_max_tx;
  j["p_max_co"] = p_max_co;
  j["bandwidth"] = bandwidth;
  j["noise_psd"] = noise_psd;
  j["sinr_gap"] = sinr_gap;
  j["f_max"] = f_max;
  j["tau"] = tau;
  j["mu"] = mu;
  j["d_out"] = d_out;
  j["d_in"] = d_in;
  j["sigma_h_sq"] = sigma_h_sq;
  j["sigma_omega_sq"] = sigma_omega_sq;
  j["omega_shape"] = omega_shape;
  j["omega_scale"] = omega_scale;
  j["omega_floor"] = omega_floor;
  j["gamma"] = quantile_gamma;
  j["m_samples"] = m_samples;
  j["rzf_alpha"] = rzf_alpha;
  j["t_feas"] = t_feas;
  return j;
}

std::uint64_t SystemConfig::digest() const { return fnv1a64(to_json().dump()); }

void SystemConfig::validate() const {
  std::ostringstream bad;
  auto require = [&](bool ok, const char* what) {
    if (!ok) bad << (bad.tellp() > 0 ? "; " : "") << what;
  };
  require(num_antennas >= 1, "num_antennas must be >= 1");
  require(num_users >= 1, "num_users must be >= 1");
  require(p_max > 0 && p_max_tx > 0 && p_max_co > 0, "power budgets must be positive");
  require(bandwidth > 0, "bandwidth must be positive");
  require(noise_psd > 0, "noise_psd must be positive");
  require(sinr_gap >= 1.0, "sinr_gap must be >= 1 (0 dB)");
  require(f_max > 0, "f_max must be positive");
  require(tau > 0, "tau must be positive");
  require(mu >= 1.0, "mu must be >= 1");
  require(d_out > 0 && d_in > 0, "payload sizes must be positive");
  require(sigma_h_sq >= 0.0 && sigma_h_sq < 1.0, "sigma_h_sq must lie in [0,1)");
  require(sigma_omega_sq >= 0.0, "sigma_omega_sq must be nonnegative");
  require(omega_shape >= 1.0 && omega_shape == std::floor(omega_shape),
          "omega_shape must be a positive integer");
  require(omega_scale > 0, "omega_scale must be positive");
  require(omega_floor > 0, "omega_floor must be positive");
  require(quantile_gamma > 0.0 && quantile_gamma < 1.0, "gamma must lie in (0,1)");
  require(m_samples >= 1, "m_samples must be >= 1");
  require(rzf_alpha >= 0.0, "rzf_alpha must be nonnegative");
  require(t_feas > 0, "t_feas must be positive");
  if (bad.tellp() > 0) throw ConfigError(bad.str());
}

}  // namespace netmoe
