// Python bindings for the core pipeline: config, states, experts, training,
// gate decisions, and simulation sets. Heavy calls release the GIL.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "netmoe/bench.hpp"
#include "netmoe/config.hpp"
#include "netmoe/errors.hpp"
#include "netmoe/experts.hpp"
#include "netmoe/gate.hpp"
#include "netmoe/netmodel.hpp"
#include "netmoe/objectives.hpp"
#include "netmoe/rng.hpp"
#include "netmoe/uncertainty.hpp"

#include <nlohmann/json.hpp>

namespace py = pybind11;
using namespace netmoe;

namespace {

std::string config_json(const SystemConfig& cfg) { return cfg.to_json().dump(2); }

NetworkState state_from_seed(const SystemConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return generate_state(cfg, rng);
}

std::string decision_repr(const GateDecision& d) {
  std::ostringstream os;
  os << "GateDecision(";
  for (std::size_t i = 0; i < d.names.size(); ++i) {
    if (i) os << ", ";
    os << d.names[i] << "@" << d.weights[i];
  }
  os << ")";
  return os.str();
}

}  // namespace

PYBIND11_MODULE(_netmoe, m) {
  m.doc() = "Agentic mixture-of-experts network optimization core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<TrainError>(m, "TrainError", PyExc_RuntimeError);
  py::register_exception<GateError>(m, "GateError", PyExc_RuntimeError);

  m.def("dbm_to_watts", &dbm_to_watts, py::arg("dbm"));
  m.def("watts_to_dbm", &watts_to_dbm, py::arg("watts"));
  m.def("db_to_linear", &db_to_linear, py::arg("db"));
  m.def("mix_seed", &Rng::mix_seed, py::arg("seed"), py::arg("stream"),
        "Derive a decorrelated substream seed.");

  py::class_<SystemConfig>(m, "SystemConfig")
      .def(py::init<>())
      .def_static("defaults", &SystemConfig::defaults)
      .def_static("load", &SystemConfig::load, py::arg("path"))
      .def_readwrite("num_antennas", &SystemConfig::num_antennas)
      .def_readwrite("num_users", &SystemConfig::num_users)
      .def_readwrite("p_max", &SystemConfig::p_max)
      .def_readwrite("p_max_tx", &SystemConfig::p_max_tx)
      .def_readwrite("p_max_co", &SystemConfig::p_max_co)
      .def_readwrite("bandwidth", &SystemConfig::bandwidth)
      .def_readwrite("noise_psd", &SystemConfig::noise_psd)
      .def_readwrite("sinr_gap", &SystemConfig::sinr_gap)
      .def_readwrite("f_max", &SystemConfig::f_max)
      .def_readwrite("tau", &SystemConfig::tau)
      .def_readwrite("mu", &SystemConfig::mu)
      .def_readwrite("d_out", &SystemConfig::d_out)
      .def_readwrite("d_in", &SystemConfig::d_in)
      .def_readwrite("sigma_h_sq", &SystemConfig::sigma_h_sq)
      .def_readwrite("sigma_omega_sq", &SystemConfig::sigma_omega_sq)
      .def_readwrite("omega_shape", &SystemConfig::omega_shape)
      .def_readwrite("omega_scale", &SystemConfig::omega_scale)
      .def_readwrite("omega_floor", &SystemConfig::omega_floor)
      .def_readwrite("quantile_gamma", &SystemConfig::quantile_gamma)
      .def_readwrite("m_samples", &SystemConfig::m_samples)
      .def_readwrite("rzf_alpha", &SystemConfig::rzf_alpha)
      .def_readwrite("t_feas", &SystemConfig::t_feas)
      .def("validate", &SystemConfig::validate)
      .def("digest", &SystemConfig::digest)
      .def("as_json", &config_json);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_static("paper", &TrainConfig::paper)
      .def_static("desk", &TrainConfig::desk)
      .def_readwrite("hidden_layers", &TrainConfig::hidden_layers)
      .def_readwrite("hidden_width", &TrainConfig::hidden_width)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("minibatches_per_epoch", &TrainConfig::minibatches_per_epoch)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("validation_size", &TrainConfig::validation_size)
      .def_readwrite("test_size", &TrainConfig::test_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("grad_clip_norm", &TrainConfig::grad_clip_norm)
      .def_readwrite("train_m_samples", &TrainConfig::train_m_samples);

  py::class_<NetworkState>(m, "NetworkState")
      .def_readwrite("h_true", &NetworkState::h_true)
      .def_readwrite("h_est", &NetworkState::h_est)
      .def_readwrite("omega_true", &NetworkState::omega_true)
      .def_readwrite("omega_est", &NetworkState::omega_est)
      .def_readwrite("beamformer", &NetworkState::beamformer)
      .def_readonly("more_users_than_antennas",
                    &NetworkState::more_users_than_antennas);

  m.def("generate_state", &state_from_seed, py::arg("cfg"), py::arg("seed"),
        "Draw one scenario (channels, workloads, beamformer) from a seed.");

  py::class_<Allocation>(m, "Allocation")
      .def(py::init<>())
      .def_property_readonly(
          "kind", [](const Allocation& a) { return to_string(a.kind); })
      .def_readwrite("p_tx", &Allocation::p_tx)
      .def_readwrite("f_co", &Allocation::f_co)
      .def_readwrite("p_co", &Allocation::p_co);

  py::class_<PerUserMetrics>(m, "PerUserMetrics")
      .def_readonly("sinr", &PerUserMetrics::sinr)
      .def_readonly("r_tx", &PerUserMetrics::r_tx)
      .def_readonly("r_co", &PerUserMetrics::r_co)
      .def_readonly("r_joint", &PerUserMetrics::r_joint)
      .def_readonly("t_tx", &PerUserMetrics::t_tx)
      .def_readonly("t_co", &PerUserMetrics::t_co)
      .def_readonly("t_joint", &PerUserMetrics::t_joint)
      .def_readonly("p_co_required", &PerUserMetrics::p_co_required);

  py::class_<ConstraintCheck>(m, "ConstraintCheck")
      .def_readonly("name", &ConstraintCheck::name)
      .def_readonly("used", &ConstraintCheck::used)
      .def_readonly("limit", &ConstraintCheck::limit)
      .def_readonly("margin", &ConstraintCheck::margin)
      .def_readonly("rel_margin", &ConstraintCheck::rel_margin)
      .def_readonly("satisfied", &ConstraintCheck::satisfied);

  py::class_<FeasibilityReport>(m, "FeasibilityReport")
      .def_readonly("feasible", &FeasibilityReport::feasible)
      .def_readonly("checks", &FeasibilityReport::checks);

  py::class_<UtilitySpec>(m, "UtilitySpec")
      .def_property_readonly("name", &UtilitySpec::name)
      .def_readonly("robust", &UtilitySpec::robust)
      .def_property_readonly(
          "domain", [](const UtilitySpec& s) { return to_string(s.domain); })
      .def_property_readonly("family", [](const UtilitySpec& s) {
        return to_string(s.family);
      })
      .def("__repr__", [](const UtilitySpec& s) {
        return "UtilitySpec(" + s.name() + ")";
      });

  py::class_<ExpertRecord>(m, "ExpertRecord")
      .def_readonly("index", &ExpertRecord::index)
      .def_readonly("name", &ExpertRecord::name)
      .def_readonly("role", &ExpertRecord::role)
      .def_readonly("description", &ExpertRecord::description)
      .def_readonly("spec", &ExpertRecord::spec)
      .def_property_readonly(
          "trained",
          [](const ExpertRecord& r) { return r.params.has_value(); })
      .def_property_readonly(
          "param_count",
          [](const ExpertRecord& r) { return param_count(r.arch); })
      .def_property_readonly("loss_trace",
                             [](const ExpertRecord& r) {
                               return r.params ? r.params->loss_trace
                                               : std::vector<double>{};
                             })
      .def("__repr__", [](const ExpertRecord& r) {
        return "ExpertRecord(" + std::to_string(r.index) + ", " + r.name + ")";
      });

  m.def("registry_build", &registry_build, py::arg("cfg"), py::arg("tc"),
        "The full 30-expert registry (untrained).");
  m.def("registry_subset", &registry_subset, py::arg("registry"),
        py::arg("indices"));
  m.def("train_expert", &train_expert, py::arg("record"), py::arg("tc"),
        py::arg("cfg"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>(),
        "Train in place; returns the final validation loss.");
  m.def("infer", &infer, py::arg("record"), py::arg("state"), py::arg("cfg"));
  m.def("save_expert", &save_expert, py::arg("record"), py::arg("path"));
  m.def("load_expert", &load_expert, py::arg("path"), py::arg("cfg"));

  m.def("joint_metrics", &joint_metrics, py::arg("state"), py::arg("alloc"),
        py::arg("cfg"), py::arg("use_true") = true);
  m.def("check_feasibility", &check_feasibility, py::arg("alloc"),
        py::arg("cfg"));
  m.def("evaluate_utility", &evaluate_utility, py::arg("spec"),
        py::arg("metrics"));
  m.def(
      "robust_utility",
      [](const UtilitySpec& spec, const NetworkState& state,
         const Allocation& alloc, const SystemConfig& cfg, double gamma,
         std::uint64_t seed) {
        return robust_utility(spec, state, alloc, ErrorModel::from_config(cfg),
                              cfg, gamma, seed);
      },
      py::arg("spec"), py::arg("state"), py::arg("alloc"), py::arg("cfg"),
      py::arg("gamma"), py::arg("seed"),
      py::call_guard<py::gil_scoped_release>(),
      "Pessimistic-tail quantile of the utility under estimation errors.");

  py::class_<ExpertCard>(m, "ExpertCard")
      .def_readonly("index", &ExpertCard::index)
      .def_readonly("name", &ExpertCard::name)
      .def_readonly("description", &ExpertCard::description);
  m.def("make_expert_card", &make_expert_card, py::arg("record"));

  py::class_<GateDecision>(m, "GateDecision")
      .def_readonly("selected", &GateDecision::selected)
      .def_readonly("names", &GateDecision::names)
      .def_readonly("weights", &GateDecision::weights)
      .def_readonly("interpretation", &GateDecision::interpretation)
      .def_readonly("raw_response", &GateDecision::raw_response)
      .def_readonly("backend_latency_s", &GateDecision::backend_latency_s)
      .def("__repr__", &decision_repr);

  py::class_<GateBackend>(m, "GateBackend")
      .def("id", &GateBackend::id);
  m.def("make_rule_backend", &make_rule_backend);
  m.def("make_replay_backend", &make_replay_backend, py::arg("store_path"));
  m.def(
      "decide",
      [](GateBackend& backend, const std::vector<ExpertCard>& library,
         const std::string& query) { return decide(backend, library, query); },
      py::arg("backend"), py::arg("library"), py::arg("query"),
      "Route a query to experts; raises GateError when no decision is safe.");
  m.def("combine", &combine, py::arg("decision"), py::arg("member_allocs"),
        py::arg("cfg"),
        "Blend member allocations with the decision weights (stays feasible).");

  py::class_<GateFixture>(m, "GateFixture")
      .def(py::init<>())
      .def_readwrite("query", &GateFixture::query)
      .def_readwrite("expert_names", &GateFixture::expert_names)
      .def_readwrite("weights", &GateFixture::weights)
      .def_readwrite("note", &GateFixture::note);
  m.def("load_fixtures", &load_fixtures, py::arg("path"));

  py::class_<FixtureOutcome>(m, "FixtureOutcome")
      .def_readonly("query", &FixtureOutcome::query)
      .def_readonly("selection_exact", &FixtureOutcome::selection_exact)
      .def_readonly("full_match", &FixtureOutcome::full_match)
      .def_readonly("failed", &FixtureOutcome::failed)
      .def_readonly("detail", &FixtureOutcome::detail);

  py::class_<AccuracyReport>(m, "AccuracyReport")
      .def_readonly("total", &AccuracyReport::total)
      .def_readonly("selection_exact", &AccuracyReport::selection_exact)
      .def_readonly("full_match", &AccuracyReport::full_match)
      .def_readonly("failures", &AccuracyReport::failures)
      .def_readonly("mean_latency_s", &AccuracyReport::mean_latency_s)
      .def_readonly("outcomes", &AccuracyReport::outcomes)
      .def("selection_rate", &AccuracyReport::selection_rate);
  m.def("evaluate_gate_accuracy", &evaluate_gate_accuracy, py::arg("backend"),
        py::arg("library"), py::arg("fixtures"),
        py::call_guard<py::gil_scoped_release>());

  py::class_<SimSetSpec>(m, "SimSetSpec")
      .def(py::init<>())
      .def_static("load", &SimSetSpec::load, py::arg("path"))
      .def_readwrite("id", &SimSetSpec::id)
      .def_readwrite("name", &SimSetSpec::name)
      .def_readwrite("query", &SimSetSpec::query)
      .def_readwrite("library", &SimSetSpec::library)
      .def_readwrite("benchmarks", &SimSetSpec::benchmarks)
      .def_readonly("x_metric", &SimSetSpec::x_metric)
      .def_readonly("y_metric", &SimSetSpec::y_metric)
      .def_readwrite("trials", &SimSetSpec::trials)
      .def_readwrite("test_states", &SimSetSpec::test_states)
      .def_readwrite("seed", &SimSetSpec::seed)
      .def_readwrite("exhaustive", &SimSetSpec::exhaustive)
      .def_readwrite("pair_weights", &SimSetSpec::pair_weights)
      .def_readwrite("fixtures_path", &SimSetSpec::fixtures_path)
      .def("validate", &SimSetSpec::validate);

  py::class_<CandidateMetrics>(m, "CandidateMetrics")
      .def_readonly("id", &CandidateMetrics::id)
      .def_readonly("kind", &CandidateMetrics::kind)
      .def_readonly("experts", &CandidateMetrics::experts)
      .def_readonly("weights", &CandidateMetrics::weights)
      .def_readonly("median", &CandidateMetrics::median)
      .def_readonly("mean", &CandidateMetrics::mean)
      .def_readonly("hard_feasible", &CandidateMetrics::hard_feasible)
      .def_readonly("feasible", &CandidateMetrics::feasible);

  py::class_<TrialResult>(m, "TrialResult")
      .def_readonly("trial", &TrialResult::trial)
      .def_readonly("gate_failed", &TrialResult::gate_failed)
      .def_readonly("gate_error", &TrialResult::gate_error)
      .def_readonly("decision", &TrialResult::decision)
      .def_readonly("candidates", &TrialResult::candidates)
      .def_readonly("trial_feasible", &TrialResult::trial_feasible);

  py::class_<RunResult>(m, "RunResult")
      .def_readonly("metrics", &RunResult::metrics)
      .def_readonly("trials", &RunResult::trials)
      .def_readonly("feasibility_accuracy", &RunResult::feasibility_accuracy)
      .def_property_readonly("gate_accuracy", [](const RunResult& r) {
        return r.gate_accuracy ? py::cast(*r.gate_accuracy)
                               : py::object(py::none());
      });

  m.def("exhaustive_pairwise", &exhaustive_pairwise, py::arg("library"),
        py::arg("states"), py::arg("spec"), py::arg("cfg"),
        py::arg("trial_seed"), py::arg("workers") = 0,
        py::call_guard<py::gil_scoped_release>());
  m.def("run_simulation_set", &run_simulation_set, py::arg("spec"),
        py::arg("backend"), py::arg("registry"), py::arg("cfg"),
        py::arg("workers") = 0, py::call_guard<py::gil_scoped_release>());
  m.def("export_results", &export_results, py::arg("run"), py::arg("cfg"),
        py::arg("dir"));
  m.def("display_value", &display_value, py::arg("metric"), py::arg("value"));
  m.def("display_unit", &display_unit, py::arg("metric"));
}
