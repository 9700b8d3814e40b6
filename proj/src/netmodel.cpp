#include "netmoe/netmodel.hpp"

#include <cmath>
#include <limits>

#include "netmoe/errors.hpp"

namespace netmoe {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRelTol = 1e-9;
}  // namespace

std::string to_string(AllocKind kind) {
  switch (kind) {
    case AllocKind::comm: return "comm";
    case AllocKind::comp: return "comp";
    case AllocKind::joint: return "joint";
  }
  return "?";
}

const ConstraintCheck* FeasibilityReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

NetworkState generate_state(const SystemConfig& cfg, Rng& rng) {
  if (cfg.sigma_h_sq < 0.0 || cfg.sigma_h_sq >= 1.0)
    throw ConfigError("generate_state: sigma_h_sq outside [0,1)");
  if (cfg.sigma_omega_sq < 0.0)
    throw ConfigError("generate_state: negative sigma_omega_sq");

  const int k_users = cfg.num_users;
  const int l_ant = cfg.num_antennas;
  NetworkState s;
  s.h_est.resize(k_users, l_ant);
  s.h_true.resize(k_users, l_ant);
  s.omega_true.resize(k_users);
  s.omega_est.resize(k_users);
  s.more_users_than_antennas = k_users > l_ant;

  // Fixed draw order (row-major estimate, then error field, then workloads)
  // is part of the determinism contract.
  for (int k = 0; k < k_users; ++k)
    for (int l = 0; l < l_ant; ++l)
      s.h_est(k, l) = rng.complex_normal(1.0 - cfg.sigma_h_sq);
  for (int k = 0; k < k_users; ++k)
    for (int l = 0; l < l_ant; ++l)
      s.h_true(k, l) = s.h_est(k, l) + rng.complex_normal(cfg.sigma_h_sq);

  const double omega_err_std = std::sqrt(cfg.sigma_omega_sq);
  const int shape = static_cast<int>(cfg.omega_shape);
  for (int k = 0; k < k_users; ++k) {
    s.omega_true(k) =
        std::max(rng.gamma_int(shape, cfg.omega_scale), cfg.omega_floor);
    const double eps = omega_err_std * rng.normal();
    s.omega_est(k) = std::max(s.omega_true(k) - eps, cfg.omega_floor);
  }

  s.beamformer = rzf_beamformer(s.h_est, cfg.rzf_alpha);
  return s;
}

Eigen::MatrixXcd rzf_beamformer(const Eigen::MatrixXcd& h_est, double alpha) {
  if (alpha < 0.0) throw ConfigError("rzf_beamformer: negative alpha");
  const Eigen::Index k_users = h_est.rows();
  Eigen::MatrixXcd gram = h_est * h_est.adjoint();
  gram += alpha * Eigen::MatrixXcd::Identity(k_users, k_users);

  Eigen::FullPivLU<Eigen::MatrixXcd> lu(gram);
  if (!lu.isInvertible())
    throw ConfigError("rzf_beamformer: regularized Gram matrix is singular");

  // gram^-1 is Hermitian, so (gram^-1 H)^H = H^H gram^-1.
  Eigen::MatrixXcd v = lu.solve(h_est).adjoint();
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    const double norm = v.col(k).norm();
    if (!(norm > 0.0))
      throw ConfigError("rzf_beamformer: zero direction for user " +
                        std::to_string(k + 1));
    v.col(k) /= norm;
  }
  return v;
}

Eigen::MatrixXd effective_gains(const Eigen::MatrixXcd& h,
                                const Eigen::MatrixXcd& v) {
  return (h * v).cwiseAbs2();
}

CommMetrics comm_metrics_for_gains(const Eigen::MatrixXd& gains,
                                   const Eigen::VectorXd& p_tx,
                                   const SystemConfig& cfg) {
  const Eigen::Index k_users = gains.rows();
  const double noise = cfg.noise_psd * cfg.bandwidth;
  CommMetrics m;
  m.sinr.resize(k_users);
  m.r_tx.resize(k_users);
  m.t_tx.resize(k_users);
  for (Eigen::Index k = 0; k < k_users; ++k) {
    const double signal = gains(k, k) * p_tx(k);
    double interference = 0.0;
    for (Eigen::Index j = 0; j < k_users; ++j)
      if (j != k) interference += gains(k, j) * p_tx(j);
    m.sinr(k) = signal / (interference + noise);
    m.r_tx(k) =
        cfg.bandwidth * std::log2(1.0 + m.sinr(k) / cfg.sinr_gap);
    m.t_tx(k) = m.r_tx(k) > 0.0 ? cfg.d_out / m.r_tx(k) : kInf;
  }
  return m;
}

CommMetrics comm_metrics(const NetworkState& state, const Eigen::VectorXd& p_tx,
                         const SystemConfig& cfg) {
  return comm_metrics_for_gains(effective_gains(state.h_true, state.beamformer),
                                p_tx, cfg);
}

CompMetrics comp_metrics(const Eigen::VectorXd& f_co,
                         const Eigen::VectorXd& omega,
                         const SystemConfig& cfg) {
  const Eigen::Index k_users = f_co.size();
  CompMetrics m;
  m.r_co.resize(k_users);
  m.t_co.resize(k_users);
  for (Eigen::Index k = 0; k < k_users; ++k) {
    m.r_co(k) = f_co(k) / omega(k);
    m.t_co(k) = m.r_co(k) > 0.0 ? cfg.d_in / m.r_co(k) : kInf;
  }
  m.p_co_required = cpu_power_required(f_co, cfg);
  return m;
}

double cpu_power_required(const Eigen::VectorXd& f_co,
                          const SystemConfig& cfg) {
  if (f_co.size() == 0) return 0.0;
  return cfg.tau * std::pow(f_co.sum(), cfg.mu);
}

PerUserMetrics joint_metrics(const NetworkState& state, const Allocation& alloc,
                             const SystemConfig& cfg, bool use_true) {
  const int k_users = cfg.num_users;
  PerUserMetrics m;
  m.sinr = Eigen::VectorXd::Zero(k_users);
  m.r_tx = Eigen::VectorXd::Zero(k_users);
  m.r_co = Eigen::VectorXd::Zero(k_users);
  m.t_tx = Eigen::VectorXd::Constant(k_users, kInf);
  m.t_co = Eigen::VectorXd::Constant(k_users, kInf);

  if (alloc.kind != AllocKind::comp) {
    const auto& h = use_true ? state.h_true : state.h_est;
    const auto comm =
        comm_metrics_for_gains(effective_gains(h, state.beamformer),
                               alloc.p_tx, cfg);
    m.sinr = comm.sinr;
    m.r_tx = comm.r_tx;
    m.t_tx = comm.t_tx;
  }
  if (alloc.kind != AllocKind::comm) {
    const auto& omega = use_true ? state.omega_true : state.omega_est;
    const auto comp = comp_metrics(alloc.f_co, omega, cfg);
    m.r_co = comp.r_co;
    m.t_co = comp.t_co;
    m.p_co_required = comp.p_co_required;
  }
  m.r_joint = m.r_tx + m.r_co;
  m.t_joint = m.t_tx + m.t_co;
  return m;
}

namespace {

ConstraintCheck upper_bound(const std::string& name, double used,
                            double limit) {
  ConstraintCheck c;
  c.name = name;
  c.used = used;
  c.limit = limit;
  c.margin = limit - used;
  c.rel_margin = c.margin / std::max(std::abs(limit), 1.0);
  c.satisfied = c.rel_margin >= -kRelTol;
  return c;
}

ConstraintCheck lower_bound(const std::string& name, double used,
                            double limit) {
  ConstraintCheck c;
  c.name = name;
  c.used = used;
  c.limit = limit;
  c.margin = used - limit;
  c.rel_margin = c.margin / std::max(std::abs(limit), 1.0);
  c.satisfied = c.rel_margin >= -kRelTol;
  return c;
}

}  // namespace

FeasibilityReport check_feasibility(const Allocation& alloc,
                                    const SystemConfig& cfg) {
  FeasibilityReport report;
  const bool has_tx = alloc.kind != AllocKind::comp;
  const bool has_co = alloc.kind != AllocKind::comm;
  const double p_tx_sum = alloc.p_tx.size() ? alloc.p_tx.sum() : 0.0;
  const double p_co = has_co ? cpu_power_required(alloc.f_co, cfg) : 0.0;

  if (has_tx) {
    report.checks.push_back(lower_bound(
        "p_tx_min", alloc.p_tx.size() ? alloc.p_tx.minCoeff() : 0.0, 0.0));
  }
  if (has_co) {
    report.checks.push_back(lower_bound(
        "f_co_min", alloc.f_co.size() ? alloc.f_co.minCoeff() : 0.0, 0.0));
    report.checks.push_back(upper_bound(
        "sum_f_co", alloc.f_co.size() ? alloc.f_co.sum() : 0.0, cfg.f_max));
  }
  switch (alloc.kind) {
    case AllocKind::comm:
      report.checks.push_back(upper_bound("sum_p_tx", p_tx_sum, cfg.p_max_tx));
      break;
    case AllocKind::comp:
      report.checks.push_back(upper_bound("p_co", p_co, cfg.p_max_co));
      break;
    case AllocKind::joint:
      report.checks.push_back(
          upper_bound("joint_power", p_tx_sum + p_co, cfg.p_max));
      break;
  }
  report.feasible = true;
  for (const auto& c : report.checks) report.feasible &= c.satisfied;
  return report;
}

}  // namespace netmoe
