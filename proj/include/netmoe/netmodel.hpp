#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netmoe/config.hpp"
#include "netmoe/rng.hpp"

namespace netmoe {

/// Which resource variables an allocation carries.
enum class AllocKind { comm, comp, joint };

std::string to_string(AllocKind kind);

/// Resource decision for one scheduling interval. Fields outside the kind are
/// zero: a comm allocation has no CPU split, a comp allocation no transmit
/// power. p_co is the CPU power implied by f_co (kept explicit so budget
/// checks and combinations never re-derive it inconsistently).
struct Allocation {
  AllocKind kind = AllocKind::joint;
  Eigen::VectorXd p_tx;  // per-user transmit power [W]
  Eigen::VectorXd f_co;  // per-user CPU frequency [cycles/s]
  double p_co = 0.0;     // CPU power drawn by f_co [W]
};

/// One scenario draw: true and estimated channels/workloads plus the
/// beamformer computed from the estimate.
struct NetworkState {
  Eigen::MatrixXcd h_true;  // K x L downlink channels
  Eigen::MatrixXcd h_est;   // K x L estimates the controller acts on
  Eigen::VectorXd omega_true;  // cycles/bit per user
  Eigen::VectorXd omega_est;
  Eigen::MatrixXcd beamformer;  // L x K, unit-norm columns, from h_est
  bool more_users_than_antennas = false;  // K > L warning (RZF still defined)
};

/// Per-user link/compute figures for one (state, allocation) pair. Rates are
/// bits/s, delays seconds; delays are +inf where the corresponding rate is
/// zero. Joint figures stack the domains: r_joint = r_tx + r_co and t_joint =
/// t_tx + t_co elementwise.
struct PerUserMetrics {
  Eigen::VectorXd sinr;
  Eigen::VectorXd r_tx, r_co, r_joint;
  Eigen::VectorXd t_tx, t_co, t_joint;
  double p_co_required = 0.0;
};

struct ConstraintCheck {
  std::string name;
  double used = 0.0;
  double limit = 0.0;
  double margin = 0.0;      // limit - used, in the constraint's own units
  double rel_margin = 0.0;  // margin / max(|limit|, 1)
  bool satisfied = true;    // rel_margin >= -1e-9
};

struct FeasibilityReport {
  std::vector<ConstraintCheck> checks;
  bool feasible = true;

  const ConstraintCheck* find(const std::string& name) const;
};

/// Draws channels and workloads. True channel entries are CN(0,1); the
/// estimate is the MMSE component, i.e. h = h_est + e with e ~ CN(0, sigma_h^2)
/// and h_est ~ CN(0, 1 - sigma_h^2). Workloads are Gamma draws; the estimate
/// subtracts a N(0, sigma_omega^2) error and is clamped to omega_floor.
NetworkState generate_state(const SystemConfig& cfg, Rng& rng);

/// Regularized zero-forcing directions from a channel estimate: columns of
/// H^H (H H^H + alpha I)^-1, each scaled to unit norm.
Eigen::MatrixXcd rzf_beamformer(const Eigen::MatrixXcd& h_est, double alpha);

/// G(k, j) = |h_k^H v_j|^2 for channel rows h_k and beamformer columns v_j.
Eigen::MatrixXd effective_gains(const Eigen::MatrixXcd& h,
                                const Eigen::MatrixXcd& v);

struct CommMetrics {
  Eigen::VectorXd sinr, r_tx, t_tx;
};

/// SINR / rate / delay for the given gains and transmit powers. The rate
/// applies the configured SINR gap: r = W log2(1 + sinr / gap); noise power
/// is noise_psd * bandwidth.
CommMetrics comm_metrics_for_gains(const Eigen::MatrixXd& gains,
                                   const Eigen::VectorXd& p_tx,
                                   const SystemConfig& cfg);

/// Same, on the state's true channel and its beamformer.
CommMetrics comm_metrics(const NetworkState& state, const Eigen::VectorXd& p_tx,
                         const SystemConfig& cfg);

struct CompMetrics {
  Eigen::VectorXd r_co, t_co;
  double p_co_required = 0.0;
};

/// Compute rates r = f / omega, delays d_in / r, and the CPU power
/// tau * (sum f)^mu implied by the split.
CompMetrics comp_metrics(const Eigen::VectorXd& f_co,
                         const Eigen::VectorXd& omega,
                         const SystemConfig& cfg);

/// Full per-user metrics for an allocation on a state. use_true selects the
/// ground-truth channel/workload; otherwise the estimated ones are used (the
/// view the controller optimizes against). Single-domain allocations leave
/// the other domain's rates at zero and delays at +inf.
PerUserMetrics joint_metrics(const NetworkState& state, const Allocation& alloc,
                             const SystemConfig& cfg, bool use_true);

/// Hard budget checks for the allocation kind: entry nonnegativity, transmit
/// sum (comm), CPU power (comp), CPU frequency sum (whenever f is active),
/// and the shared power budget (joint). p_co is always re-derived from f_co,
/// never trusted from the record. satisfied means rel_margin >= -1e-9.
FeasibilityReport check_feasibility(const Allocation& alloc,
                                    const SystemConfig& cfg);

/// tau * (sum f)^mu.
double cpu_power_required(const Eigen::VectorXd& f_co, const SystemConfig& cfg);

}  // namespace netmoe
