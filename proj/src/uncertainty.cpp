#include "netmoe/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "netmoe/errors.hpp"

namespace netmoe {

ErrorModel ErrorModel::from_config(const SystemConfig& cfg) {
  ErrorModel m;
  m.sigma_h_sq = cfg.sigma_h_sq;
  m.sigma_omega_sq = cfg.sigma_omega_sq;
  m.omega_floor = cfg.omega_floor;
  m.m_samples = cfg.m_samples;
  return m;
}

NetworkState sample_perturbed_state(const NetworkState& state,
                                    const ErrorModel& model, Rng& rng) {
  NetworkState out = state;
  for (Eigen::Index k = 0; k < state.h_est.rows(); ++k)
    for (Eigen::Index l = 0; l < state.h_est.cols(); ++l)
      out.h_true(k, l) = state.h_est(k, l) + rng.complex_normal(model.sigma_h_sq);
  const double err_std = std::sqrt(model.sigma_omega_sq);
  for (Eigen::Index k = 0; k < state.omega_est.size(); ++k)
    out.omega_true(k) =
        std::max(state.omega_est(k) + err_std * rng.normal(), model.omega_floor);
  return out;
}

double empirical_quantile(std::span<const double> values, double gamma,
                          QuantileTail tail) {
  if (values.empty()) throw ConfigError("empirical_quantile: empty sample");
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw ConfigError("empirical_quantile: gamma outside (0,1]");
  const auto n = static_cast<std::ptrdiff_t>(values.size());
  // Nearest-rank: the ceil(gamma*n)-th order statistic from the chosen end.
  auto rank = static_cast<std::ptrdiff_t>(std::ceil(gamma * static_cast<double>(n)));
  rank = std::clamp<std::ptrdiff_t>(rank, 1, n);
  std::vector<double> work(values.begin(), values.end());
  const std::ptrdiff_t idx =
      tail == QuantileTail::lower ? rank - 1 : n - rank;
  std::nth_element(work.begin(), work.begin() + idx, work.end());
  return work[idx];
}

QuantileTail pessimistic_tail(UtilitySense sense) {
  return sense == UtilitySense::maximize ? QuantileTail::lower
                                         : QuantileTail::upper;
}

double robust_utility(const UtilitySpec& spec, const NetworkState& state,
                      const Allocation& alloc, const ErrorModel& model,
                      const SystemConfig& cfg, double gamma,
                      std::uint64_t seed) {
  std::vector<double> values(static_cast<std::size_t>(model.m_samples));
  for (int m = 0; m < model.m_samples; ++m) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(m));
    const NetworkState perturbed = sample_perturbed_state(state, model, rng);
    values[static_cast<std::size_t>(m)] =
        evaluate_utility(spec, joint_metrics(perturbed, alloc, cfg, true));
  }
  return empirical_quantile(values, gamma, pessimistic_tail(spec.sense()));
}

}  // namespace netmoe
