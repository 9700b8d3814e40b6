#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "netmoe/config.hpp"
#include "netmoe/netmodel.hpp"
#include "netmoe/objectives.hpp"

namespace netmoe {

/// Fully connected net: input_dim -> hidden_width x hidden_layers (ReLU) ->
/// output_dim (linear).
struct MlpArchitecture {
  int input_dim = 0;
  int hidden_layers = 0;
  int hidden_width = 0;
  int output_dim = 0;

  bool operator==(const MlpArchitecture&) const = default;
};

/// Number of scalar weights and biases in the template.
long long param_count(const MlpArchitecture& arch);

/// Trainable state of one expert plus its training provenance.
struct PolicyParameters {
  std::vector<Eigen::MatrixXd> weights;  // weights[l]: out x in
  std::vector<Eigen::VectorXd> biases;
  std::uint64_t seed = 0;
  int epochs_trained = 0;
  std::vector<double> loss_trace;  // mean validation loss per epoch
};

/// Searchable metadata attached to each registry entry.
struct ExpertTags {
  Domain domain = Domain::joint;
  bool robust = false;
  std::string emphasis;  // throughput / fairness / balanced / responsiveness / latency
};

/// One registry entry: identity, objective, architecture, and (once trained)
/// parameters.
struct ExpertRecord {
  int index = 0;  // 1-based registry position
  std::string name;
  std::string role;         // one-line statement of what it optimizes
  std::string description;  // selection-card text shown to the gate
  ExpertTags tags;
  UtilitySpec spec;
  MlpArchitecture arch;
  std::optional<PolicyParameters> params;
};

/// Training/evaluation budget. paper() mirrors the published setup; desk()
/// is sized so the full registry trains in minutes on a laptop while keeping
/// every structural property (same features, mapping, losses).
struct TrainConfig {
  int hidden_layers = 10;
  int hidden_width = 400;
  int epochs = 500;
  int minibatches_per_epoch = 50;
  int batch_size = 1000;
  int validation_size = 2000;
  int test_size = 4000;
  double learning_rate = 1.0e-3;
  double grad_clip_norm = 10.0;
  int train_m_samples = 50;  // perturbation draws per robust training loss

  static TrainConfig paper();
  static TrainConfig desk();
};

/// Input/output widths for a domain at K users: comm nets read the stacked
/// channel estimate (2K^2 reals) and emit K power logits (plus none for CPU);
/// comp nets read K workload estimates and emit a power logit plus K split
/// logits; joint nets read both and emit K+1 power logits plus K split logits.
MlpArchitecture architecture_for(Domain domain, int num_users,
                                 const TrainConfig& tc);

/// Feature vector the net consumes: effective channel gains enter through the
/// estimate's real/imag parts (row-major user order), workloads normalized by
/// their prior mean.
Eigen::VectorXd build_features(const NetworkState& state, Domain domain,
                               const SystemConfig& cfg);

Eigen::VectorXd mlp_forward(const PolicyParameters& p, const Eigen::VectorXd& x);

/// Deterministic init from the seed: weights and biases uniform on
/// +/- 1/sqrt(fan_in) per layer.
PolicyParameters init_parameters(const MlpArchitecture& arch,
                                 std::uint64_t seed);

/// Map raw outputs onto the feasible set (softmax power splits, budget-capped
/// CPU frequencies). Always feasible by construction, and the joint kind
/// spends the shared budget exactly.
Allocation map_outputs(const Eigen::VectorXd& z, Domain domain,
                       const SystemConfig& cfg);

/// Unsupervised training on generated states: minimize -(utility) for rate
/// families, +(utility) for delay families, by plain SGD with gradient-norm
/// clipping. Stores parameters and the per-epoch validation trace in the
/// record and returns the final validation loss.
double train_expert(ExpertRecord& rec, const TrainConfig& tc,
                    const SystemConfig& cfg, std::uint64_t seed);

/// End-to-end policy evaluation: features -> net -> feasible allocation.
Allocation infer(const ExpertRecord& rec, const NetworkState& state,
                 const SystemConfig& cfg);

/// The full 30-expert registry (untrained), canonical order and names.
std::vector<ExpertRecord> registry_build(const SystemConfig& cfg,
                                         const TrainConfig& tc);

/// Subset of a registry by 1-based indices, preserving order.
std::vector<ExpertRecord> registry_subset(const std::vector<ExpertRecord>& all,
                                          const std::vector<int>& indices);

/// Binary model file (magic/version header, JSON metadata, raw little-endian
/// doubles). load_expert validates architecture/user-count consistency
/// against cfg and throws IoError on mismatch or truncation.
void save_expert(const ExpertRecord& rec, const std::string& path);
ExpertRecord load_expert(const std::string& path, const SystemConfig& cfg);

}  // namespace netmoe
