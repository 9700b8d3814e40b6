// Shared internals between the expert forward path and the trainer. Not part
// of the public surface.
#pragma once

#include <vector>

#include <Eigen/Dense>

#include "netmoe/config.hpp"
#include "netmoe/experts.hpp"
#include "netmoe/netmodel.hpp"
#include "netmoe/objectives.hpp"

namespace netmoe::detail {

Eigen::VectorXd softmax(const Eigen::VectorXd& z);
double logistic(double z);

// Everything the mapping backward pass needs from the forward pass.
struct MapCache {
  Domain domain = Domain::comm;
  Eigen::VectorXd soft_p;  // softmax over power logits (comm: K, joint: K+1)
  double sig = 0.0;        // comp only: logistic(z0)
  Eigen::VectorXd soft_f;  // softmax over frequency logits (comp/joint: K)
  double p_co_target = 0.0;
  double f_pow = 0.0;
  double f_cap = 0.0;
  bool cap_binds = false;  // f_max < f_pow at the forward point
};

Allocation map_outputs_cached(const Eigen::VectorXd& z, Domain domain,
                              const SystemConfig& cfg, MapCache* cache);

struct ForwardCache {
  Eigen::VectorXd x;
  std::vector<Eigen::VectorXd> pre;  // pre-activation per layer, incl. output
  std::vector<Eigen::VectorXd> act;  // ReLU output per hidden layer
};

Eigen::VectorXd mlp_forward_cached(const PolicyParameters& p,
                                   const Eigen::VectorXd& x, ForwardCache* c);

}  // namespace netmoe::detail
