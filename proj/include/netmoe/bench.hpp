#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "netmoe/experts.hpp"
#include "netmoe/gate.hpp"
#include "netmoe/objectives.hpp"
#include "netmoe/uncertainty.hpp"

namespace netmoe {

/// One benchmark scenario: which experts are in play, what the operator asks
/// for, and which utilities the exports plot.
struct SimSetSpec {
  int id = 0;
  std::string name;
  std::string query;
  std::vector<int> library;     // registry indices (1-based)
  std::vector<int> benchmarks;  // held-out optimal experts; disjoint from library
  UtilitySpec x_metric;
  UtilitySpec y_metric;
  std::vector<UtilitySpec> bar_metrics;  // defaults to {x, y} when empty
  int trials = 10;
  int test_states = 256;
  std::uint64_t seed = 1;
  bool exhaustive = true;                      // include the pairwise table
  std::vector<double> pair_weights = {0.5};    // w in (w, 1-w) per pair
  std::string fixtures_path;  // accuracy mode (Set 4) when nonempty

  static SimSetSpec from_json(const nlohmann::json& j);
  static SimSetSpec load(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;  // throws ConfigError (overlap, bad indices, ...)
};

/// Aggregated metric values of one candidate on a trial's test states.
struct CandidateMetrics {
  std::string id;    // e.g. "Comm_SumR_Reg", "Comm_MaxT_Reg+Comp_MaxT_Reg@0.5", "agentic"
  std::string kind;  // library | pair | benchmark | agentic
  std::vector<int> experts;      // registry indices
  std::vector<double> weights;   // same order
  std::vector<double> median;    // per metric (x, y, bars...), state-median
  std::vector<double> mean;      // per metric, state-mean
  bool hard_feasible = true;     // budget checks pass on every state
  bool feasible = true;          // hard_feasible and delay metrics <= t_feas
};

struct TrialResult {
  int trial = 0;
  bool gate_failed = false;
  std::string gate_error;
  GateDecision decision;  // meaningful only when !gate_failed
  std::vector<CandidateMetrics> candidates;  // library, pairs, benchmarks, agentic
  double backend_latency_s = 0.0;
  double inference_s = 0.0;     // expert forward passes + combination
  double end_to_end_s = 0.0;
  bool trial_feasible = false;  // agentic candidate's feasible flag
};

struct RunResult {
  SimSetSpec spec;
  std::vector<UtilitySpec> metrics;  // x, y, then extra bar metrics
  std::vector<TrialResult> trials;
  double feasibility_accuracy = 0.0;  // feasible trials / trials
  std::optional<AccuracyReport> gate_accuracy;  // fixtures mode only
};

/// Every singleton and every unordered pair of the library at the spec's pair
/// weights, scored on the given states. Candidate count with the default
/// single weight: A + A(A-1)/2. Throws TrainError when an expert is
/// untrained, before any evaluation. trial_seed drives the robust-metric
/// perturbations (shared across candidates).
std::vector<CandidateMetrics> exhaustive_pairwise(
    const std::vector<ExpertRecord>& library,
    const std::vector<NetworkState>& states, const SimSetSpec& spec,
    const SystemConfig& cfg, std::uint64_t trial_seed, int workers);

/// Full scenario run: per trial, fresh test states, a gate decision on the
/// library, and metrics for every candidate (library singletons, pairs when
/// spec.exhaustive, benchmarks, and the agentic blend). A gate failure marks
/// the trial failed and the run continues. Fixtures mode instead scores the
/// corpus via evaluate_gate_accuracy.
RunResult run_simulation_set(const SimSetSpec& spec, GateBackend& backend,
                             const std::vector<ExpertRecord>& registry,
                             const SystemConfig& cfg, int workers);

/// Write plot-ready artifacts into dir: scatter.csv (per trial x candidate),
/// bars_<metric>.csv (per candidate, aggregated over trials), summary.json
/// (decisions, accuracy, config digest) and timings.json (wall-clock numbers;
/// kept out of summary.json so everything else is byte-deterministic). Rates
/// are exported in Mbps, delays as log10 seconds saturated at the finite
/// sentinel. Throws IoError with nothing partially written on unwritable dir.
void export_results(const RunResult& run, const SystemConfig& cfg,
                    const std::string& dir);

/// Helpers shared by exports and tests: display transform for one metric
/// value (Mbps for rate families, log10 seconds for delay families, saturated
/// at the largest finite double).
double display_value(const UtilitySpec& metric, double value);
std::string display_unit(const UtilitySpec& metric);

}  // namespace netmoe
