#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "netmoe/experts.hpp"
#include "netmoe/netmodel.hpp"
#include "netmoe/objectives.hpp"

namespace netmoe {

/// Gradient of a scalar loss with respect to every weight/bias, laid out like
/// PolicyParameters.
struct ParameterGrad {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  static ParameterGrad zeros_like(const PolicyParameters& p);
  void add_scaled(const ParameterGrad& other, double scale);
  double squared_norm() const;
};

/// Training loss of one expert on one state: the (sign-fixed, scale-
/// normalized) utility of the mapped allocation. Regular specs score the
/// estimated parameters. Robust specs draw train_m_samples perturbed ground
/// truths from (robust_seed, m) substreams and score the pessimistic-tail
/// order statistic, so the loss is the same quantile the evaluation uses.
double state_loss(const UtilitySpec& spec, const PolicyParameters& p,
                  const NetworkState& state, const TrainConfig& tc,
                  const SystemConfig& cfg, std::uint64_t robust_seed);

/// Same loss plus its analytic gradient, reverse-mode through net, feasible-
/// set mapping, link/compute metrics and utility. Nonsmooth points (min,
/// argmin/argmax, the CPU frequency cap) use one-sided subgradients with ties
/// broken toward the lower user index.
double state_loss_grad(const UtilitySpec& spec, const PolicyParameters& p,
                       const NetworkState& state, const TrainConfig& tc,
                       const SystemConfig& cfg, std::uint64_t robust_seed,
                       ParameterGrad& grad);

/// Divisor applied to each family's raw utility so that loss magnitudes are
/// comparable across families (rates are Hz-scale, delays millisecond-scale).
double loss_scale(UtilityFamily family, const SystemConfig& cfg);

}  // namespace netmoe
