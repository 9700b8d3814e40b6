#include "netmoe/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "netmoe/errors.hpp"
#include "netmoe/rng.hpp"

namespace netmoe {

using nlohmann::json;

namespace {

// Substream tags for the per-trial randomness: test states and the robust
// perturbation base. Every candidate in a trial shares the same draws.
constexpr std::uint64_t kStreamBenchStates = 7001;
constexpr std::uint64_t kStreamBenchPerturb = 7002;

constexpr double kInf = std::numeric_limits<double>::infinity();

double wall_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_weight(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", w);
  return buf;
}

/// Metrics scored during a run: x, y, then bar metrics not already present.
std::vector<UtilitySpec> run_metrics(const SimSetSpec& spec) {
  std::vector<UtilitySpec> m = {spec.x_metric, spec.y_metric};
  for (const auto& extra : spec.bar_metrics)
    if (std::find(m.begin(), m.end(), extra) == m.end()) m.push_back(extra);
  return m;
}

/// Bar exports: the explicit list, or x and y when none was given.
std::vector<UtilitySpec> bar_metrics_for(const SimSetSpec& spec) {
  if (!spec.bar_metrics.empty()) return spec.bar_metrics;
  return {spec.x_metric, spec.y_metric};
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

/// Strided parallel loop; exceptions from workers resurface on the caller.
void parallel_for(int n, int workers, const std::function<void(int)>& body) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// What a redrawn ground truth looks like to an allocation: the effective
/// gains of the perturbed channel under the state's (fixed) beamformer, and
/// the perturbed workload. Candidates only ever consume these two.
struct PerturbedDraw {
  Eigen::MatrixXd gains;
  Eigen::VectorXd omega;
};

struct EvalContext {
  const SystemConfig* cfg = nullptr;
  std::vector<UtilitySpec> metrics;
  ErrorModel model;
  std::vector<std::uint64_t> state_seeds;         // robust CRN, one per state
  std::vector<std::vector<PerturbedDraw>> draws;  // [state][m], robust runs only
  bool any_robust = false;
};

EvalContext make_context(const SimSetSpec& spec, const SystemConfig& cfg,
                         const std::vector<NetworkState>& states,
                         std::uint64_t trial_seed, int workers) {
  EvalContext ctx;
  ctx.cfg = &cfg;
  ctx.metrics = run_metrics(spec);
  ctx.model = ErrorModel::from_config(cfg);
  ctx.state_seeds.reserve(states.size());
  const std::uint64_t base = Rng::mix_seed(trial_seed, kStreamBenchPerturb);
  for (std::size_t s = 0; s < states.size(); ++s)
    ctx.state_seeds.push_back(Rng::mix_seed(base, s));
  for (const auto& m : ctx.metrics) ctx.any_robust |= m.robust;
  if (!ctx.any_robust) return ctx;

  // The perturbation draws are shared by every candidate (and between the
  // robust metrics), so they are materialized once per trial. Draw m of
  // state s is exactly what robust_utility(state_seeds[s]) would sample.
  ctx.draws.resize(states.size());
  parallel_for(static_cast<int>(states.size()), workers, [&](int s) {
    auto& row = ctx.draws[static_cast<std::size_t>(s)];
    row.reserve(static_cast<std::size_t>(ctx.model.m_samples));
    for (int m = 0; m < ctx.model.m_samples; ++m) {
      Rng rng = Rng::derive(ctx.state_seeds[static_cast<std::size_t>(s)],
                            static_cast<std::uint64_t>(m));
      const NetworkState perturbed = sample_perturbed_state(
          states[static_cast<std::size_t>(s)], ctx.model, rng);
      row.push_back({effective_gains(perturbed.h_true, perturbed.beamformer),
                     perturbed.omega_true});
    }
  });
  return ctx;
}

/// joint_metrics() on a precomputed draw; same arithmetic, so the values
/// match a robust_utility() evaluation bit for bit.
PerUserMetrics metrics_from_draw(const PerturbedDraw& draw,
                                 const Allocation& alloc,
                                 const SystemConfig& cfg) {
  const int k_users = cfg.num_users;
  PerUserMetrics m;
  m.sinr = Eigen::VectorXd::Zero(k_users);
  m.r_tx = Eigen::VectorXd::Zero(k_users);
  m.r_co = Eigen::VectorXd::Zero(k_users);
  m.t_tx = Eigen::VectorXd::Constant(k_users, kInf);
  m.t_co = Eigen::VectorXd::Constant(k_users, kInf);
  if (alloc.kind != AllocKind::comp) {
    const auto comm = comm_metrics_for_gains(draw.gains, alloc.p_tx, cfg);
    m.sinr = comm.sinr;
    m.r_tx = comm.r_tx;
    m.t_tx = comm.t_tx;
  }
  if (alloc.kind != AllocKind::comm) {
    const auto comp = comp_metrics(alloc.f_co, draw.omega, cfg);
    m.r_co = comp.r_co;
    m.t_co = comp.t_co;
    m.p_co_required = comp.p_co_required;
  }
  m.r_joint = m.r_tx + m.r_co;
  m.t_joint = m.t_tx + m.t_co;
  return m;
}

/// One enumerated candidate before scoring. Single-expert plans point at a
/// precomputed allocation row; blends list the rows and weights to combine.
struct CandidatePlan {
  std::string id;
  std::string kind;
  std::vector<int> rows;        // positions into the allocation cache
  std::vector<int> indices;     // registry indices, same order
  std::vector<double> weights;
};

std::vector<NetworkState> draw_states(const SimSetSpec& spec,
                                      const SystemConfig& cfg,
                                      std::uint64_t trial_seed) {
  Rng rng(Rng::mix_seed(trial_seed, kStreamBenchStates));
  std::vector<NetworkState> states;
  states.reserve(static_cast<std::size_t>(spec.test_states));
  for (int s = 0; s < spec.test_states; ++s)
    states.push_back(generate_state(cfg, rng));
  return states;
}

/// Per-state allocations of every expert in `experts`, parallel over experts.
std::vector<std::vector<Allocation>> build_alloc_cache(
    const std::vector<const ExpertRecord*>& experts,
    const std::vector<NetworkState>& states, const SystemConfig& cfg,
    int workers) {
  std::vector<std::vector<Allocation>> cache(experts.size());
  parallel_for(static_cast<int>(experts.size()), workers, [&](int e) {
    auto& row = cache[static_cast<std::size_t>(e)];
    row.reserve(states.size());
    for (const auto& state : states)
      row.push_back(infer(*experts[static_cast<std::size_t>(e)], state, cfg));
  });
  return cache;
}

Allocation blend_for_state(const CandidatePlan& plan,
                           const std::vector<std::vector<Allocation>>& cache,
                           std::size_t s, const SystemConfig& cfg) {
  GateDecision d;
  d.selected = plan.rows;
  d.weights = plan.weights;
  std::vector<Allocation> members;
  members.reserve(plan.rows.size());
  for (int row : plan.rows)
    members.push_back(cache[static_cast<std::size_t>(row)][s]);
  return combine(d, members, cfg);
}

CandidateMetrics score_candidate(const CandidatePlan& plan,
                                 const std::vector<std::vector<Allocation>>& cache,
                                 const std::vector<NetworkState>& states,
                                 const EvalContext& ctx) {
  const SystemConfig& cfg = *ctx.cfg;
  CandidateMetrics out;
  out.id = plan.id;
  out.kind = plan.kind;
  out.experts = plan.indices;
  out.weights = plan.weights;

  const std::size_t n_metrics = ctx.metrics.size();
  std::vector<std::vector<double>> values(n_metrics);
  for (auto& col : values) col.reserve(states.size());

  const bool single = plan.rows.size() == 1;
  std::vector<std::vector<double>> robust_vals(n_metrics);
  for (std::size_t s = 0; s < states.size(); ++s) {
    const Allocation alloc =
        single ? cache[static_cast<std::size_t>(plan.rows[0])][s]
               : blend_for_state(plan, cache, s, cfg);
    if (out.hard_feasible && !check_feasibility(alloc, cfg).feasible)
      out.hard_feasible = false;
    // Regular metrics score the allocation on the ground truth; robust ones
    // take the pessimistic quantile over the trial's shared redrawn truths.
    PerUserMetrics m;
    bool have_m = false;
    if (ctx.any_robust) {
      for (auto& col : robust_vals) col.clear();
      for (const auto& draw : ctx.draws[s]) {
        const PerUserMetrics pm = metrics_from_draw(draw, alloc, cfg);
        for (std::size_t mi = 0; mi < n_metrics; ++mi)
          if (ctx.metrics[mi].robust)
            robust_vals[mi].push_back(evaluate_utility(ctx.metrics[mi], pm));
      }
    }
    for (std::size_t mi = 0; mi < n_metrics; ++mi) {
      const UtilitySpec& spec = ctx.metrics[mi];
      if (spec.robust) {
        values[mi].push_back(empirical_quantile(robust_vals[mi],
                                                cfg.quantile_gamma,
                                                pessimistic_tail(spec.sense())));
      } else {
        if (!have_m) {
          m = joint_metrics(states[s], alloc, cfg, /*use_true=*/true);
          have_m = true;
        }
        values[mi].push_back(evaluate_utility(spec, m));
      }
    }
  }

  out.median.resize(n_metrics);
  out.mean.resize(n_metrics);
  for (std::size_t mi = 0; mi < n_metrics; ++mi) {
    out.median[mi] = median_of(values[mi]);
    out.mean[mi] = mean_of(values[mi]);
  }
  out.feasible = out.hard_feasible;
  for (std::size_t mi = 0; mi < n_metrics && out.feasible; ++mi) {
    const UtilityFamily f = ctx.metrics[mi].family;
    if (f == UtilityFamily::max_delay || f == UtilityFamily::sum_delay)
      out.feasible = out.median[mi] <= cfg.t_feas;
  }
  return out;
}

std::vector<CandidateMetrics> score_all(
    const std::vector<CandidatePlan>& plans,
    const std::vector<std::vector<Allocation>>& cache,
    const std::vector<NetworkState>& states, const EvalContext& ctx,
    int workers) {
  std::vector<CandidateMetrics> out(plans.size());
  parallel_for(static_cast<int>(plans.size()), workers, [&](int i) {
    out[static_cast<std::size_t>(i)] =
        score_candidate(plans[static_cast<std::size_t>(i)], cache, states, ctx);
  });
  return out;
}

void require_trained(const std::vector<const ExpertRecord*>& experts) {
  for (const auto* rec : experts)
    if (!rec->params)
      throw TrainError("expert " + rec->name +
                       " has no trained parameters; train or load it first");
}

std::vector<CandidatePlan> singleton_plans(
    const std::vector<const ExpertRecord*>& experts, int row_offset,
    const std::string& kind) {
  std::vector<CandidatePlan> plans;
  plans.reserve(experts.size());
  for (std::size_t e = 0; e < experts.size(); ++e)
    plans.push_back({experts[e]->name,
                     kind,
                     {row_offset + static_cast<int>(e)},
                     {experts[e]->index},
                     {1.0}});
  return plans;
}

std::vector<CandidatePlan> pair_plans(
    const std::vector<const ExpertRecord*>& library,
    const std::vector<double>& pair_weights) {
  std::vector<CandidatePlan> plans;
  for (std::size_t a = 0; a < library.size(); ++a)
    for (std::size_t b = a + 1; b < library.size(); ++b)
      for (double w : pair_weights)
        plans.push_back({library[a]->name + "+" + library[b]->name + "@" +
                             format_weight(w),
                         "pair",
                         {static_cast<int>(a), static_cast<int>(b)},
                         {library[a]->index, library[b]->index},
                         {w, 1.0 - w}});
  return plans;
}

}  // namespace

SimSetSpec SimSetSpec::from_json(const json& j) {
  SimSetSpec s;
  if (j.contains("id")) s.id = j.at("id").get<int>();
  if (j.contains("name")) s.name = j.at("name").get<std::string>();
  if (j.contains("query")) s.query = j.at("query").get<std::string>();
  if (j.contains("library")) s.library = j.at("library").get<std::vector<int>>();
  if (j.contains("benchmarks"))
    s.benchmarks = j.at("benchmarks").get<std::vector<int>>();
  if (j.contains("x_metric"))
    s.x_metric = spec_from_name(j.at("x_metric").get<std::string>());
  if (j.contains("y_metric"))
    s.y_metric = spec_from_name(j.at("y_metric").get<std::string>());
  if (j.contains("bar_metrics"))
    for (const auto& name : j.at("bar_metrics"))
      s.bar_metrics.push_back(spec_from_name(name.get<std::string>()));
  if (j.contains("trials")) s.trials = j.at("trials").get<int>();
  if (j.contains("test_states")) s.test_states = j.at("test_states").get<int>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("exhaustive")) s.exhaustive = j.at("exhaustive").get<bool>();
  if (j.contains("pair_weights"))
    s.pair_weights = j.at("pair_weights").get<std::vector<double>>();
  if (j.contains("fixtures"))
    s.fixtures_path = j.at("fixtures").get<std::string>();
  return s;
}

SimSetSpec SimSetSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open simulation set file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("simulation set parse error in " + path + ": " + e.what());
  }
  try {
    SimSetSpec s = from_json(j);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError("simulation set field error in " + path + ": " + e.what());
  }
}

json SimSetSpec::to_json() const {
  json j;
  j["id"] = id;
  j["name"] = name;
  j["query"] = query;
  j["library"] = library;
  j["benchmarks"] = benchmarks;
  j["x_metric"] = x_metric.name();
  j["y_metric"] = y_metric.name();
  json bars = json::array();
  for (const auto& m : bar_metrics) bars.push_back(m.name());
  j["bar_metrics"] = bars;
  j["trials"] = trials;
  j["test_states"] = test_states;
  j["seed"] = seed;
  j["exhaustive"] = exhaustive;
  j["pair_weights"] = pair_weights;
  if (!fixtures_path.empty()) j["fixtures"] = fixtures_path;
  return j;
}

void SimSetSpec::validate() const {
  std::ostringstream bad;
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) bad << (bad.tellp() > 0 ? "; " : "") << what;
  };
  const bool accuracy_mode = !fixtures_path.empty();
  require(accuracy_mode || !query.empty(), "query must not be empty");
  require(accuracy_mode || !library.empty(), "library must not be empty");
  require(trials >= 1, "trials must be >= 1");
  require(test_states >= 1, "test_states must be >= 1");
  for (int idx : library)
    require(idx >= 1, "library indices are 1-based");
  for (int idx : benchmarks) {
    require(idx >= 1, "benchmark indices are 1-based");
    require(std::find(library.begin(), library.end(), idx) == library.end(),
            "benchmark expert " + std::to_string(idx) + " is already in the "
            "library");
  }
  for (std::size_t a = 0; a < library.size(); ++a)
    for (std::size_t b = a + 1; b < library.size(); ++b)
      require(library[a] != library[b],
              "library lists expert " + std::to_string(library[a]) + " twice");
  require(!pair_weights.empty(), "pair_weights must not be empty");
  for (double w : pair_weights)
    require(w > 0.0 && w < 1.0, "pair weights must lie in (0, 1)");
  if (bad.tellp() > 0)
    throw ConfigError("simulation set " + std::to_string(id) + ": " + bad.str());
}

std::vector<CandidateMetrics> exhaustive_pairwise(
    const std::vector<ExpertRecord>& library,
    const std::vector<NetworkState>& states, const SimSetSpec& spec,
    const SystemConfig& cfg, std::uint64_t trial_seed, int workers) {
  std::vector<const ExpertRecord*> experts;
  experts.reserve(library.size());
  for (const auto& rec : library) experts.push_back(&rec);
  require_trained(experts);

  const EvalContext ctx = make_context(spec, cfg, states, trial_seed, workers);
  const auto cache = build_alloc_cache(experts, states, cfg, workers);
  std::vector<CandidatePlan> plans = singleton_plans(experts, 0, "library");
  for (auto& plan : pair_plans(experts, spec.pair_weights))
    plans.push_back(std::move(plan));
  return score_all(plans, cache, states, ctx, workers);
}

RunResult run_simulation_set(const SimSetSpec& spec, GateBackend& backend,
                             const std::vector<ExpertRecord>& registry,
                             const SystemConfig& cfg, int workers) {
  spec.validate();
  RunResult out;
  out.spec = spec;
  out.metrics = run_metrics(spec);

  const std::vector<ExpertRecord> lib_records =
      spec.library.empty() ? registry : registry_subset(registry, spec.library);
  std::vector<ExpertCard> cards;
  cards.reserve(lib_records.size());
  for (const auto& rec : lib_records) cards.push_back(make_expert_card(rec));

  if (!spec.fixtures_path.empty()) {
    const auto fixtures = load_fixtures(spec.fixtures_path);
    out.gate_accuracy = evaluate_gate_accuracy(backend, cards, fixtures);
    return out;
  }

  const std::vector<ExpertRecord> bench_records =
      registry_subset(registry, spec.benchmarks);
  std::vector<const ExpertRecord*> experts;
  for (const auto& rec : lib_records) experts.push_back(&rec);
  for (const auto& rec : bench_records) experts.push_back(&rec);
  require_trained(experts);
  const int lib_size = static_cast<int>(lib_records.size());

  int feasible_trials = 0;
  for (int t = 0; t < spec.trials; ++t) {
    const auto trial_start = std::chrono::steady_clock::now();
    const std::uint64_t trial_seed =
        Rng::mix_seed(spec.seed, static_cast<std::uint64_t>(t));
    const auto states = draw_states(spec, cfg, trial_seed);
    const EvalContext ctx = make_context(spec, cfg, states, trial_seed, workers);

    TrialResult tr;
    tr.trial = t;
    try {
      tr.decision = decide(backend, cards, spec.query);
      tr.backend_latency_s = tr.decision.backend_latency_s;
    } catch (const GateError& e) {
      tr.gate_failed = true;
      tr.gate_error = e.what();
    }

    const auto inference_start = std::chrono::steady_clock::now();
    auto cache = build_alloc_cache(experts, states, cfg, workers);
    if (!tr.gate_failed) {
      std::vector<Allocation> agentic_row;
      agentic_row.reserve(states.size());
      CandidatePlan agentic{"agentic", "agentic", tr.decision.selected, {},
                            tr.decision.weights};
      for (std::size_t s = 0; s < states.size(); ++s)
        agentic_row.push_back(blend_for_state(agentic, cache, s, cfg));
      cache.push_back(std::move(agentic_row));
    }
    tr.inference_s = wall_since(inference_start);

    std::vector<CandidatePlan> plans;
    {
      std::vector<const ExpertRecord*> lib_ptrs(experts.begin(),
                                                experts.begin() + lib_size);
      plans = singleton_plans(lib_ptrs, 0, "library");
      if (spec.exhaustive)
        for (auto& plan : pair_plans(lib_ptrs, spec.pair_weights))
          plans.push_back(std::move(plan));
    }
    for (std::size_t b = 0; b < bench_records.size(); ++b)
      plans.push_back({bench_records[b].name,
                       "benchmark",
                       {lib_size + static_cast<int>(b)},
                       {bench_records[b].index},
                       {1.0}});
    if (!tr.gate_failed) {
      std::vector<int> agentic_indices;
      for (int pos : tr.decision.selected)
        agentic_indices.push_back(lib_records[static_cast<std::size_t>(pos)].index);
      plans.push_back({"agentic",
                       "agentic",
                       {static_cast<int>(cache.size()) - 1},
                       std::move(agentic_indices),
                       tr.decision.weights});
    }

    tr.candidates = score_all(plans, cache, states, ctx, workers);
    if (!tr.gate_failed) tr.trial_feasible = tr.candidates.back().feasible;
    if (tr.trial_feasible) ++feasible_trials;
    tr.end_to_end_s = wall_since(trial_start);
    out.trials.push_back(std::move(tr));
  }
  out.feasibility_accuracy =
      static_cast<double>(feasible_trials) / static_cast<double>(spec.trials);
  return out;
}

double display_value(const UtilitySpec& metric, double value) {
  constexpr double kMax = std::numeric_limits<double>::max();
  switch (metric.family) {
    case UtilityFamily::sum_rate:
    case UtilityFamily::min_rate:
      return std::min(value, kMax) / 1.0e6;
    case UtilityFamily::log_rate:
      return std::clamp(value, -kMax, kMax);
    case UtilityFamily::max_delay:
    case UtilityFamily::sum_delay:
      return std::log10(std::min(value, kMax));
  }
  return value;
}

std::string display_unit(const UtilitySpec& metric) {
  switch (metric.family) {
    case UtilityFamily::sum_rate:
    case UtilityFamily::min_rate:
      return "Mbps";
    case UtilityFamily::log_rate:
      return "log(bit/s)";
    case UtilityFamily::max_delay:
    case UtilityFamily::sum_delay:
      return "log10(s)";
  }
  return "";
}

namespace {

json accuracy_to_json(const AccuracyReport& report) {
  json outcomes = json::array();
  for (const auto& o : report.outcomes)
    outcomes.push_back({{"query", o.query},
                        {"selection_exact", o.selection_exact},
                        {"full_match", o.full_match},
                        {"failed", o.failed},
                        {"detail", o.detail}});
  return {{"total", report.total},
          {"selection_exact", report.selection_exact},
          {"full_match", report.full_match},
          {"failures", report.failures},
          {"selection_rate", report.selection_rate()},
          {"outcomes", outcomes}};
}

}  // namespace

void export_results(const RunResult& run, const SystemConfig& cfg,
                    const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " +
                        ec.message());

  const bool accuracy_mode = run.gate_accuracy.has_value();
  std::vector<std::pair<std::string, std::string>> files;  // name -> content

  if (!accuracy_mode) {
    // scatter.csv: one row per (trial, candidate), x/y in display units.
    std::ostringstream scatter;
    scatter << "trial,candidate,kind,x,y,hard_feasible,feasible\n";
    for (const auto& tr : run.trials)
      for (const auto& c : tr.candidates)
        scatter << tr.trial << ',' << c.id << ',' << c.kind << ','
                << format_number(display_value(run.metrics[0], c.median[0]))
                << ','
                << format_number(display_value(run.metrics[1], c.median[1]))
                << ',' << (c.hard_feasible ? 1 : 0) << ','
                << (c.feasible ? 1 : 0) << '\n';
    files.emplace_back("scatter.csv", scatter.str());

    // bars_<metric>.csv: per candidate, trial-aggregated.
    for (const auto& metric : bar_metrics_for(run.spec)) {
      const auto it = std::find(run.metrics.begin(), run.metrics.end(), metric);
      const std::size_t mi =
          static_cast<std::size_t>(it - run.metrics.begin());
      std::vector<std::string> order;                 // first-seen candidate ids
      std::map<std::string, std::vector<double>> medians, means;
      std::map<std::string, int> feasible_count;
      std::map<std::string, std::string> kinds;
      for (const auto& tr : run.trials)
        for (const auto& c : tr.candidates) {
          if (!medians.count(c.id)) {
            order.push_back(c.id);
            kinds[c.id] = c.kind;
          }
          medians[c.id].push_back(c.median[mi]);
          means[c.id].push_back(c.mean[mi]);
          feasible_count[c.id] += c.feasible ? 1 : 0;
        }
      std::ostringstream bars;
      bars << "candidate,kind,median,mean,feasible_trials\n";
      for (const auto& id : order)
        bars << id << ',' << kinds[id] << ','
             << format_number(display_value(metric, median_of(medians[id])))
             << ','
             << format_number(display_value(metric, mean_of(means[id])))
             << ',' << feasible_count[id] << '\n';
      files.emplace_back("bars_" + metric.name() + ".csv", bars.str());
    }
  }

  // summary.json: everything reproducible. Wall-clock numbers go to
  // timings.json so identical runs produce byte-identical summaries.
  json summary;
  summary["mode"] = accuracy_mode ? "accuracy" : "simulation";
  summary["set"] = run.spec.to_json();
  json metric_names = json::array();
  for (const auto& m : run.metrics)
    metric_names.push_back(json{{"name", m.name()},
                                {"unit", display_unit(m)}});
  summary["metrics"] = metric_names;
  char digest_hex[19];
  std::snprintf(digest_hex, sizeof digest_hex, "0x%016llx",
                static_cast<unsigned long long>(cfg.digest()));
  summary["config_digest"] = digest_hex;
  summary["timings_file"] = "timings.json";
  if (accuracy_mode) {
    summary["accuracy"] = accuracy_to_json(*run.gate_accuracy);
  } else {
    summary["feasibility_accuracy"] = run.feasibility_accuracy;
    json trials = json::array();
    for (const auto& tr : run.trials) {
      json jt;
      jt["trial"] = tr.trial;
      jt["gate_failed"] = tr.gate_failed;
      if (tr.gate_failed) {
        jt["gate_error"] = tr.gate_error;
      } else {
        jt["selection"] = {{"names", tr.decision.names},
                           {"weights", tr.decision.weights}};
        jt["interpretation"] = tr.decision.interpretation;
      }
      jt["trial_feasible"] = tr.trial_feasible;
      jt["candidates"] = tr.candidates.size();
      trials.push_back(std::move(jt));
    }
    summary["trials"] = trials;
  }
  files.emplace_back("summary.json", summary.dump(2) + "\n");

  json timings;
  if (accuracy_mode) {
    timings["mean_backend_latency_s"] = run.gate_accuracy->mean_latency_s;
  } else {
    json per_trial = json::array();
    double lat = 0.0, inf = 0.0, e2e = 0.0;
    for (const auto& tr : run.trials) {
      per_trial.push_back({{"trial", tr.trial},
                           {"backend_latency_s", tr.backend_latency_s},
                           {"inference_s", tr.inference_s},
                           {"end_to_end_s", tr.end_to_end_s}});
      lat += tr.backend_latency_s;
      inf += tr.inference_s;
      e2e += tr.end_to_end_s;
    }
    const double n = std::max<std::size_t>(run.trials.size(), 1);
    timings["trials"] = per_trial;
    timings["mean_backend_latency_s"] = lat / n;
    timings["mean_inference_s"] = inf / n;
    timings["mean_end_to_end_s"] = e2e / n;
  }
  files.emplace_back("timings.json", timings.dump(2) + "\n");

  // All contents are composed above; only now touch the filesystem, cleaning
  // up on failure so a bad target never keeps a partial export.
  std::vector<fs::path> written;
  for (const auto& [name, content] : files) {
    const fs::path path = fs::path(dir) / name;
    std::ofstream outf(path, std::ios::binary | std::ios::trunc);
    if (outf) outf << content;
    if (!outf) {
      for (const auto& p : written) fs::remove(p, ec);
      throw IoError("cannot write " + path.string());
    }
    written.push_back(path);
  }
}

}  // namespace netmoe
