#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace netmoe {

double dbm_to_watts(double dbm);
double watts_to_dbm(double watts);
double db_to_linear(double db);

/// Scenario description shared by every module: link/compute budgets, signal
/// model constants and uncertainty levels. All fields are in linear SI units
/// (watts, Hz, seconds, cycles); JSON inputs may instead use the dB(m)-suffixed
/// aliases listed in from_json().
struct SystemConfig {
  int num_antennas = 4;  // transmit antennas L
  int num_users = 4;     // served users K

  // Power budgets [W]. p_max caps transmit + CPU power for joint allocations;
  // p_max_tx / p_max_co cap the single-domain allocations.
  double p_max = 2.511886431509580;
  double p_max_tx = 2.511886431509580;
  double p_max_co = 2.511886431509580;

  double bandwidth = 5.0e6;            // [Hz]
  double noise_psd = 3.16227766016838e-11;  // [W/Hz] (-75 dBm/Hz)
  double sinr_gap = 8.91250938133746;  // linear SINR gap to capacity (9.5 dB)

  double f_max = 4.6e9;  // CPU frequency budget [cycles/s]
  double tau = 1.0e-28;  // CPU power coefficient: p_co = tau * (sum f)^mu
  double mu = 3.0;

  double d_out = 2.5e4;  // downlink payload per user [bits]
  double d_in = 5.0e4;   // compute workload per user [bits]

  double sigma_h_sq = 0.15;    // channel estimation error variance
  double sigma_omega_sq = 3200.0;  // workload-intensity estimation error variance
  double omega_shape = 2.0;    // Gamma shape of the true cycles/bit draw
  double omega_scale = 200.0;  // Gamma scale of the true cycles/bit draw
  double omega_floor = 1.0;    // clamp for estimated cycles/bit

  double quantile_gamma = 0.05;  // robustness level for outage-style metrics
  int m_samples = 200;           // perturbation draws per robust evaluation

  double rzf_alpha = 0.2;  // beamformer regularization
  double t_feas = 0.1;     // delay budget used for feasibility flags [s]

  /// Reference scenario used throughout the tests and bundled sim sets.
  static SystemConfig defaults();

  static SystemConfig from_json(const nlohmann::json& j);
  static SystemConfig load(const std::string& path);
  nlohmann::json to_json() const;

  /// Digest over the canonical JSON form; recorded in run manifests.
  std::uint64_t digest() const;

  /// Throws ConfigError on non-positive budgets, counts, or variances.
  void validate() const;
};

}  // namespace netmoe
