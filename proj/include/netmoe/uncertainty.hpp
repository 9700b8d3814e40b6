#pragma once

#include <cstdint>
#include <span>

#include "netmoe/netmodel.hpp"
#include "netmoe/objectives.hpp"

namespace netmoe {

enum class QuantileTail { lower, upper };

/// Perturbation model used to score an allocation under parameter
/// uncertainty: resample what the true channel/workload could be around the
/// estimate the controller acted on.
struct ErrorModel {
  double sigma_h_sq = 0.15;
  double sigma_omega_sq = 3200.0;
  double omega_floor = 1.0;
  int m_samples = 200;

  static ErrorModel from_config(const SystemConfig& cfg);
};

/// A state whose estimates equal the input's but whose ground truth is
/// redrawn: h = h_est + CN(0, sigma_h^2), omega = max(omega_est + N(0,
/// sigma_omega^2), omega_floor). The beamformer is unchanged (it depends on
/// the estimate only).
NetworkState sample_perturbed_state(const NetworkState& state,
                                    const ErrorModel& model, Rng& rng);

/// Nearest-rank empirical quantile. For the lower tail this is the
/// ceil(gamma*n)-th smallest value; for the upper tail the ceil(gamma*n)-th
/// largest. gamma in (0, 1].
double empirical_quantile(std::span<const double> values, double gamma,
                          QuantileTail tail);

/// Tail that makes the quantile a pessimistic score for the sense: lower tail
/// for utilities being maximized, upper tail for ones being minimized.
QuantileTail pessimistic_tail(UtilitySense sense);

/// gamma-quantile of the utility over m_samples perturbed ground truths.
/// Perturbation m uses the substream (seed, m), so values are independent of
/// evaluation order and shared across candidates given the same seed.
double robust_utility(const UtilitySpec& spec, const NetworkState& state,
                      const Allocation& alloc, const ErrorModel& model,
                      const SystemConfig& cfg, double gamma,
                      std::uint64_t seed);

}  // namespace netmoe
