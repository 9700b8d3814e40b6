// netmoe command-line front end: train/infer/gate/bench/search/accuracy plus
// registry export, with reproducible seeds and manifest emission.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "netmoe/bench.hpp"
#include "netmoe/config.hpp"
#include "netmoe/errors.hpp"
#include "netmoe/experts.hpp"
#include "netmoe/gate.hpp"
#include "netmoe/netmodel.hpp"
#include "netmoe/objectives.hpp"
#include "netmoe/rng.hpp"
#include "netmoe/uncertainty.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace {

using netmoe::ConfigError;
using netmoe::GateError;
using netmoe::IoError;
using netmoe::TrainError;
using nlohmann::json;

// Exit codes, one per failure class so scripts can branch on them.
constexpr int kExitUsage = 1;       // bad flags / missing subcommand
constexpr int kExitConfig = 2;      // config or sim-set file problems
constexpr int kExitGate = 3;        // backend/parse/selection failures
constexpr int kExitTrain = 4;       // divergence or unusable training setup
constexpr int kExitMissing = 5;     // unknown expert, missing model/input file
constexpr int kExitCredential = 6;  // http backend without its env credential
constexpr int kExitOutput = 7;      // unwritable output target

/// IoError rethrown at a write call site; maps to kExitOutput instead of
/// kExitMissing.
struct OutputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CredentialError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::string scale = "desk";
  std::string backend = "rule";
  std::string replay_store = "data/replay_store.json";
  std::string models_dir = "models";
  std::string out_dir = "out";
  std::string set_path;
  std::string expert = "all";
  std::string query;
  std::string query_file;
  std::string fixtures_path;
  std::vector<int> library;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::int64_t state_seed = 1;
  bool state_seed_given = false;
  int workers = 0;
};

json versions_json() {
  return {{"netmoe", "0.1.0"}, {"model_format", 1}, {"artifact_format", 1}};
}

netmoe::TrainConfig train_config_for(const Options& opts) {
  if (opts.scale == "paper") return netmoe::TrainConfig::paper();
  if (opts.scale == "desk") return netmoe::TrainConfig::desk();
  throw ConfigError("unknown scale '" + opts.scale + "' (use desk or paper)");
}

/// System config plus the raw document, which may carry a "gate" section for
/// the http backend.
std::pair<netmoe::SystemConfig, json> load_config(const Options& opts) {
  if (opts.config_path.empty())
    return {netmoe::SystemConfig::defaults(), json::object()};
  const netmoe::SystemConfig cfg = netmoe::SystemConfig::load(opts.config_path);
  std::ifstream in(opts.config_path);
  json doc;
  in >> doc;  // load() already validated it parses
  return {cfg, doc};
}

netmoe::HttpBackendConfig http_config_from(const json& doc) {
  netmoe::HttpBackendConfig http;
  if (!doc.contains("gate")) return http;
  const json& g = doc.at("gate");
  if (g.contains("base_url")) http.base_url = g.at("base_url").get<std::string>();
  if (g.contains("model")) http.model = g.at("model").get<std::string>();
  if (g.contains("api_key_env"))
    http.api_key_env = g.at("api_key_env").get<std::string>();
  if (g.contains("temperature"))
    http.temperature = g.at("temperature").get<double>();
  if (g.contains("timeout_s")) http.timeout_s = g.at("timeout_s").get<int>();
  if (g.contains("max_retries"))
    http.max_retries = g.at("max_retries").get<int>();
  return http;
}

std::unique_ptr<netmoe::GateBackend> make_backend(const Options& opts,
                                                  const json& config_doc) {
  if (opts.backend == "rule") return netmoe::make_rule_backend();
  if (opts.backend == "replay")
    return netmoe::make_replay_backend(opts.replay_store);
  if (opts.backend == "http") {
    const netmoe::HttpBackendConfig http = http_config_from(config_doc);
    const char* key = std::getenv(http.api_key_env.c_str());
    if (!key || !*key)
      throw CredentialError("http backend needs the credential in $" +
                            http.api_key_env + " (variable is named by the "
                            "config; the key itself is never stored in files)");
    return netmoe::make_http_backend(http);
  }
  throw ConfigError("unknown backend '" + opts.backend +
                    "' (use rule, replay, or http)");
}

std::string read_query(const Options& opts) {
  if (!opts.query.empty()) return opts.query;
  if (!opts.query_file.empty()) {
    std::ifstream in(opts.query_file, std::ios::binary);
    if (!in) throw IoError("cannot open query file: " + opts.query_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string q = ss.str();
    while (!q.empty() && (q.back() == '\n' || q.back() == '\r')) q.pop_back();
    return q;
  }
  throw ConfigError("no query given (use --query or --query-file)");
}

/// Expert selector: "all", a 1-based index, a registry name, or a
/// comma-separated mix of the latter two.
std::vector<int> select_experts(const std::vector<netmoe::ExpertRecord>& registry,
                                const std::string& token) {
  std::vector<int> out;
  if (token == "all") {
    for (const auto& rec : registry) out.push_back(rec.index);
    return out;
  }
  std::stringstream ss(token);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    bool numeric = !part.empty() &&
                   part.find_first_not_of("0123456789") == std::string::npos;
    if (numeric) {
      const int idx = std::atoi(part.c_str());
      if (idx < 1 || idx > static_cast<int>(registry.size()))
        throw IoError("expert index " + part + " outside 1.." +
                      std::to_string(registry.size()));
      out.push_back(idx);
      continue;
    }
    const auto it = std::find_if(
        registry.begin(), registry.end(),
        [&](const netmoe::ExpertRecord& r) { return r.name == part; });
    if (it == registry.end()) throw IoError("unknown expert name: " + part);
    out.push_back(it->index);
  }
  if (out.empty()) throw ConfigError("empty expert selection");
  return out;
}

std::string model_path(const Options& opts, const std::string& name) {
  return (std::filesystem::path(opts.models_dir) / (name + ".expert")).string();
}

/// Replaces registry slots with their trained counterparts from disk.
void load_models(std::vector<netmoe::ExpertRecord>& registry,
                 const std::vector<int>& indices, const Options& opts,
                 const netmoe::SystemConfig& cfg) {
  for (int idx : indices) {
    auto& slot = registry[static_cast<std::size_t>(idx - 1)];
    netmoe::ExpertRecord loaded =
        netmoe::load_expert(model_path(opts, slot.name), cfg);
    if (loaded.name != slot.name)
      throw IoError(model_path(opts, slot.name) + " holds expert " +
                    loaded.name + ", expected " + slot.name);
    slot = std::move(loaded);
  }
}

json manifest_json(const char* command, const netmoe::SystemConfig& cfg,
                   const Options& opts, json extra) {
  char digest_hex[19];
  std::snprintf(digest_hex, sizeof digest_hex, "0x%016llx",
                static_cast<unsigned long long>(cfg.digest()));
  json m;
  m["command"] = command;
  m["config"] = opts.config_path.empty() ? "<defaults>" : opts.config_path;
  m["config_digest"] = digest_hex;
  m["scale"] = opts.scale;
  m["versions"] = versions_json();
  for (auto& [key, value] : extra.items()) m[key] = value;
  return m;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (out) out << content;
  if (!out) throw OutputError("cannot write " + path);
}

void write_manifest(const std::string& dir, const json& manifest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create output directory " + dir);
  write_file((std::filesystem::path(dir) / "manifest.json").string(),
             manifest.dump(2) + "\n");
}

json vec_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json allocation_json(const netmoe::Allocation& alloc) {
  return {{"kind", netmoe::to_string(alloc.kind)},
          {"p_tx", vec_json(alloc.p_tx)},
          {"f_co", vec_json(alloc.f_co)},
          {"p_co", alloc.p_co}};
}

json metrics_json(const netmoe::PerUserMetrics& m) {
  return {{"sinr", vec_json(m.sinr)},     {"r_tx", vec_json(m.r_tx)},
          {"r_co", vec_json(m.r_co)},     {"r_joint", vec_json(m.r_joint)},
          {"t_tx", vec_json(m.t_tx)},     {"t_co", vec_json(m.t_co)},
          {"t_joint", vec_json(m.t_joint)}};
}

json feasibility_json(const netmoe::FeasibilityReport& report) {
  json checks = json::array();
  for (const auto& c : report.checks)
    checks.push_back({{"name", c.name},
                      {"used", c.used},
                      {"limit", c.limit},
                      {"margin", c.margin},
                      {"satisfied", c.satisfied}});
  return {{"feasible", report.feasible}, {"checks", checks}};
}

json decision_json(const netmoe::GateDecision& decision,
                   const std::vector<netmoe::ExpertCard>& cards) {
  std::vector<int> registry_indices;
  for (int pos : decision.selected)
    registry_indices.push_back(cards[static_cast<std::size_t>(pos)].index);
  return {{"experts", registry_indices},
          {"names", decision.names},
          {"weights", decision.weights},
          {"interpretation", decision.interpretation},
          {"backend_latency_s", decision.backend_latency_s}};
}

// ---------------------------------------------------------------------------

int cmd_train(const Options& opts) {
  const auto [cfg, doc] = load_config(opts);
  (void)doc;
  const netmoe::TrainConfig tc = train_config_for(opts);
  auto registry = netmoe::registry_build(cfg, tc);
  const std::vector<int> selection = select_experts(registry, opts.expert);

  std::error_code ec;
  std::filesystem::create_directories(opts.models_dir, ec);
  if (ec) throw OutputError("cannot create models directory " + opts.models_dir);

  // Per-expert seeds derive from the run seed and the registry index, so a
  // subset run trains the same model as a full run.
  struct Row {
    int index;
    double final_loss;
  };
  std::vector<Row> rows(selection.size());
  std::vector<std::exception_ptr> errors(selection.size());
  {
    int workers = opts.workers > 0
                      ? opts.workers
                      : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers,
                                        static_cast<int>(selection.size())));
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = static_cast<std::size_t>(w); i < selection.size();
             i += static_cast<std::size_t>(workers)) {
          try {
            auto& rec = registry[static_cast<std::size_t>(selection[i] - 1)];
            const double loss = netmoe::train_expert(
                rec, tc, cfg,
                netmoe::Rng::mix_seed(opts.seed,
                                      static_cast<std::uint64_t>(rec.index)));
            rows[i] = {rec.index, loss};
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  // Persist models, traces, and the registry manifest (upserted so partial
  // runs keep earlier entries).
  const std::string manifest_path =
      (std::filesystem::path(opts.models_dir) / "registry_manifest.json")
          .string();
  json entries = json::array();
  {
    std::ifstream in(manifest_path);
    if (in) {
      json existing;
      try {
        in >> existing;
        if (existing.contains("experts")) entries = existing["experts"];
      } catch (const json::exception&) {
        entries = json::array();  // rebuilt below
      }
    }
  }
  for (const Row& row : rows) {
    const auto& rec = registry[static_cast<std::size_t>(row.index - 1)];
    try {
      netmoe::save_expert(rec, model_path(opts, rec.name));
    } catch (const IoError& e) {
      throw OutputError(e.what());
    }
    std::ostringstream trace;
    trace << "epoch,validation_loss\n";
    for (std::size_t ep = 0; ep < rec.params->loss_trace.size(); ++ep) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", rec.params->loss_trace[ep]);
      trace << (ep + 1) << ',' << buf << '\n';
    }
    write_file((std::filesystem::path(opts.models_dir) /
                (rec.name + ".loss.csv"))
                   .string(),
               trace.str());
    json entry = {{"index", rec.index},
                  {"name", rec.name},
                  {"utility", rec.spec.name()},
                  {"file", rec.name + ".expert"},
                  {"trace", rec.name + ".loss.csv"},
                  {"seed", rec.params->seed},
                  {"epochs", rec.params->epochs_trained},
                  {"final_validation_loss", row.final_loss}};
    bool replaced = false;
    for (auto& e : entries)
      if (e.contains("name") && e["name"] == rec.name) {
        e = entry;
        replaced = true;
      }
    if (!replaced) entries.push_back(entry);
    std::printf("trained %-14s  epochs=%d  final validation loss %.6g\n",
                rec.name.c_str(), rec.params->epochs_trained, row.final_loss);
  }
  std::sort(entries.begin(), entries.end(),
            [](const json& a, const json& b) {
              return a.at("index").get<int>() < b.at("index").get<int>();
            });
  write_file(manifest_path,
             json{{"experts", entries}}.dump(2) + "\n");
  write_manifest(opts.models_dir,
                 manifest_json("train", cfg, opts,
                               {{"seed", opts.seed},
                                {"experts", opts.expert},
                                {"models_dir", opts.models_dir}}));
  return 0;
}

int cmd_infer(const Options& opts) {
  const auto [cfg, doc] = load_config(opts);
  (void)doc;
  const netmoe::TrainConfig tc = train_config_for(opts);
  auto registry = netmoe::registry_build(cfg, tc);
  const std::vector<int> selection = select_experts(registry, opts.expert);
  if (selection.size() != 1)
    throw ConfigError("infer takes exactly one expert, got " +
                      std::to_string(selection.size()));
  load_models(registry, selection, opts, cfg);
  const auto& rec = registry[static_cast<std::size_t>(selection[0] - 1)];

  netmoe::Rng rng(static_cast<std::uint64_t>(opts.state_seed));
  const netmoe::NetworkState state = netmoe::generate_state(cfg, rng);
  const netmoe::Allocation alloc = netmoe::infer(rec, state, cfg);
  const netmoe::PerUserMetrics metrics =
      netmoe::joint_metrics(state, alloc, cfg, /*use_true=*/true);

  json out;
  out["expert"] = rec.name;
  out["utility"] = rec.spec.name();
  out["state_seed"] = opts.state_seed;
  out["allocation"] = allocation_json(alloc);
  out["metrics"] = metrics_json(metrics);
  out["utility_value"] = netmoe::evaluate_utility(rec.spec, metrics);
  if (rec.spec.robust) {
    const netmoe::ErrorModel model = netmoe::ErrorModel::from_config(cfg);
    out["robust_utility_value"] = netmoe::robust_utility(
        rec.spec, state, alloc, model, cfg, cfg.quantile_gamma,
        netmoe::Rng::mix_seed(static_cast<std::uint64_t>(opts.state_seed), 1));
  }
  out["feasibility"] = feasibility_json(netmoe::check_feasibility(alloc, cfg));
  out["manifest"] =
      manifest_json("infer", cfg, opts, {{"state_seed", opts.state_seed}});
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int cmd_gate(const Options& opts) {
  const auto [cfg, doc] = load_config(opts);
  const netmoe::TrainConfig tc = train_config_for(opts);
  auto registry = netmoe::registry_build(cfg, tc);

  std::string query = opts.query;
  std::vector<int> library = opts.library;
  if (!opts.set_path.empty()) {
    const netmoe::SimSetSpec set = netmoe::SimSetSpec::load(opts.set_path);
    if (query.empty() && opts.query_file.empty()) query = set.query;
    if (library.empty()) library = set.library;
  }
  Options effective = opts;
  effective.query = query;
  query = read_query(effective);

  const std::vector<netmoe::ExpertRecord> lib_records =
      library.empty() ? registry : netmoe::registry_subset(registry, library);
  std::vector<netmoe::ExpertCard> cards;
  for (const auto& rec : lib_records) cards.push_back(make_expert_card(rec));

  auto backend = make_backend(opts, doc);
  const netmoe::GateDecision decision = netmoe::decide(*backend, cards, query);

  json out;
  out["backend"] = backend->id();
  out["query"] = query;
  out["selection"] = decision_json(decision, cards);
  // Off unless asked: run the selected experts on a generated state and show
  // the blended allocation.
  if (opts.state_seed_given) {
    std::vector<int> indices;
    for (int pos : decision.selected)
      indices.push_back(lib_records[static_cast<std::size_t>(pos)].index);
    load_models(registry, indices, opts, cfg);
    netmoe::Rng rng(static_cast<std::uint64_t>(opts.state_seed));
    const netmoe::NetworkState state = netmoe::generate_state(cfg, rng);
    std::vector<netmoe::Allocation> members;
    for (int idx : indices)
      members.push_back(netmoe::infer(
          registry[static_cast<std::size_t>(idx - 1)], state, cfg));
    const netmoe::Allocation blended =
        netmoe::combine(decision, members, cfg);
    out["state_seed"] = opts.state_seed;
    out["allocation"] = allocation_json(blended);
    out["metrics"] =
        metrics_json(netmoe::joint_metrics(state, blended, cfg, true));
    out["feasibility"] =
        feasibility_json(netmoe::check_feasibility(blended, cfg));
  }
  out["manifest"] = manifest_json("gate", cfg, opts,
                                  {{"backend", opts.backend}});
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int cmd_bench(const Options& opts) {
  const auto [cfg, doc] = load_config(opts);
  const netmoe::TrainConfig tc = train_config_for(opts);
  if (opts.set_path.empty()) throw ConfigError("bench needs --set <file>");
  netmoe::SimSetSpec set = netmoe::SimSetSpec::load(opts.set_path);
  set.seed = opts.seed;  // the CLI seed is the single source of randomness

  auto registry = netmoe::registry_build(cfg, tc);
  if (set.fixtures_path.empty()) {
    std::vector<int> needed = set.library;
    needed.insert(needed.end(), set.benchmarks.begin(), set.benchmarks.end());
    load_models(registry, needed, opts, cfg);
  }
  auto backend = make_backend(opts, doc);
  const netmoe::RunResult run =
      netmoe::run_simulation_set(set, *backend, registry, cfg, opts.workers);
  try {
    netmoe::export_results(run, cfg, opts.out_dir);
  } catch (const IoError& e) {
    throw OutputError(e.what());
  }
  write_manifest(opts.out_dir,
                 manifest_json("bench", cfg, opts,
                               {{"set", set.id},
                                {"set_file", opts.set_path},
                                {"seed", opts.seed},
                                {"backend", opts.backend},
                                {"workers", opts.workers}}));
  if (run.gate_accuracy) {
    std::printf("accuracy: %d/%d selection-exact, %d full, %d failures\n",
                run.gate_accuracy->selection_exact, run.gate_accuracy->total,
                run.gate_accuracy->full_match, run.gate_accuracy->failures);
  } else {
    std::printf("set %d: %zu trials, feasibility accuracy %.0f%%\n", set.id,
                run.trials.size(), 100.0 * run.feasibility_accuracy);
    if (!run.trials.empty() && !run.trials.front().gate_failed) {
      const auto& d = run.trials.front().decision;
      std::printf("gate selection:");
      for (std::size_t i = 0; i < d.names.size(); ++i)
        std::printf(" %s@%g", d.names[i].c_str(), d.weights[i]);
      std::printf("\n");
    }
  }
  std::printf("artifacts in %s\n", opts.out_dir.c_str());
  return 0;
}

int cmd_search(const Options& opts) {
  const auto [cfg, doc] = load_config(opts);
  (void)doc;
  const netmoe::TrainConfig tc = train_config_for(opts);
  if (opts.set_path.empty()) throw ConfigError("search needs --set <file>");
  netmoe::SimSetSpec set = netmoe::SimSetSpec::load(opts.set_path);
  if (opts.seed_given) set.seed = opts.seed;
  if (!set.fixtures_path.empty())
    throw ConfigError("search needs a simulation set, not a fixtures set");

  auto registry = netmoe::registry_build(cfg, tc);
  load_models(registry, set.library, opts, cfg);
  const auto library = netmoe::registry_subset(registry, set.library);

  // Same state stream as bench trial 0, so table rows are comparable.
  const std::uint64_t trial_seed = netmoe::Rng::mix_seed(set.seed, 0);
  netmoe::Rng rng(netmoe::Rng::mix_seed(trial_seed, 7001));
  std::vector<netmoe::NetworkState> states;
  for (int s = 0; s < set.test_states; ++s)
    states.push_back(netmoe::generate_state(cfg, rng));

  const auto candidates = netmoe::exhaustive_pairwise(
      library, states, set, cfg, trial_seed, opts.workers);

  std::vector<netmoe::UtilitySpec> metrics = {set.x_metric, set.y_metric};
  for (const auto& extra : set.bar_metrics)
    if (std::find(metrics.begin(), metrics.end(), extra) == metrics.end())
      metrics.push_back(extra);
  std::ostringstream csv;
  csv << "candidate,kind";
  for (const auto& m : metrics)
    csv << ',' << m.name() << "_median," << m.name() << "_mean";
  csv << ",hard_feasible,feasible\n";
  for (const auto& c : candidates) {
    csv << c.id << ',' << c.kind;
    for (std::size_t mi = 0; mi < metrics.size(); ++mi) {
      char med[40], mean[40];
      std::snprintf(med, sizeof med, "%.17g",
                    netmoe::display_value(metrics[mi], c.median[mi]));
      std::snprintf(mean, sizeof mean, "%.17g",
                    netmoe::display_value(metrics[mi], c.mean[mi]));
      csv << ',' << med << ',' << mean;
    }
    csv << ',' << (c.hard_feasible ? 1 : 0) << ',' << (c.feasible ? 1 : 0)
        << '\n';
  }
  std::error_code ec;
  std::filesystem::create_directories(opts.out_dir, ec);
  if (ec) throw OutputError("cannot create output directory " + opts.out_dir);
  write_file(
      (std::filesystem::path(opts.out_dir) / "pairwise.csv").string(),
      csv.str());
  write_manifest(opts.out_dir,
                 manifest_json("search", cfg, opts,
                               {{"set", set.id},
                                {"set_file", opts.set_path},
                                {"seed", set.seed},
                                {"workers", opts.workers}}));
  std::printf("%zu candidates -> %s/pairwise.csv\n", candidates.size(),
              opts.out_dir.c_str());
  return 0;
}

int cmd_accuracy(const Options& opts) {
  const auto [cfg, doc] = load_config(opts);
  const netmoe::TrainConfig tc = train_config_for(opts);
  if (opts.fixtures_path.empty())
    throw ConfigError("accuracy needs --fixtures <file>");
  auto registry = netmoe::registry_build(cfg, tc);
  const std::vector<netmoe::ExpertRecord> lib_records =
      opts.library.empty() ? registry
                           : netmoe::registry_subset(registry, opts.library);
  std::vector<netmoe::ExpertCard> cards;
  for (const auto& rec : lib_records) cards.push_back(make_expert_card(rec));

  auto backend = make_backend(opts, doc);
  const auto fixtures = netmoe::load_fixtures(opts.fixtures_path);
  const netmoe::AccuracyReport report =
      netmoe::evaluate_gate_accuracy(*backend, cards, fixtures);

  json out;
  out["backend"] = backend->id();
  out["total"] = report.total;
  out["selection_exact"] = report.selection_exact;
  out["full_match"] = report.full_match;
  out["failures"] = report.failures;
  out["selection_rate"] = report.selection_rate();
  out["mean_latency_s"] = report.mean_latency_s;
  json outcomes = json::array();
  for (const auto& o : report.outcomes)
    outcomes.push_back({{"query", o.query},
                        {"selection_exact", o.selection_exact},
                        {"full_match", o.full_match},
                        {"failed", o.failed},
                        {"detail", o.detail}});
  out["outcomes"] = outcomes;
  out["manifest"] = manifest_json("accuracy", cfg, opts,
                                  {{"backend", opts.backend},
                                   {"fixtures", opts.fixtures_path}});
  std::cout << out.dump(2) << std::endl;
  return 0;
}

int cmd_export_registry(const Options& opts) {
  const auto [cfg, doc] = load_config(opts);
  (void)doc;
  const netmoe::TrainConfig tc = train_config_for(opts);
  const auto registry = netmoe::registry_build(cfg, tc);
  json experts = json::array();
  for (const auto& rec : registry)
    experts.push_back({{"index", rec.index},
                       {"name", rec.name},
                       {"role", rec.role},
                       {"impact", rec.tags.emphasis},
                       {"domain", netmoe::to_string(rec.tags.domain)},
                       {"robust", rec.tags.robust},
                       {"utility", rec.spec.name()},
                       {"description", rec.description},
                       {"architecture",
                        {{"input_dim", rec.arch.input_dim},
                         {"hidden_layers", rec.arch.hidden_layers},
                         {"hidden_width", rec.arch.hidden_width},
                         {"output_dim", rec.arch.output_dim}}},
                       {"param_count", netmoe::param_count(rec.arch)}});
  json out = {{"experts", experts},
              {"manifest", manifest_json("export-registry", cfg, opts, {})}};
  std::cout << out.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options opts;
  CLI::App app{"agentic mixture-of-experts network optimization toolkit"};
  app.set_version_flag("--version", "netmoe 0.1.0");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--config", opts.config_path,
                 "system config JSON (defaults to the built-in scenario)");
  app.add_option("--scale", opts.scale, "training scale: desk or paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--workers", opts.workers,
                 "worker threads (0 = logical cores)");
  app.add_option("--models", opts.models_dir, "model directory");
  app.add_option("--out", opts.out_dir, "output directory for artifacts");
  app.add_option("--backend", opts.backend, "gate backend")
      ->check(CLI::IsMember({"rule", "replay", "http"}));
  app.add_option("--replay-store", opts.replay_store,
                 "replay backend response store");

  auto* train = app.add_subcommand("train", "train experts and save models");
  train->add_option("--expert", opts.expert,
                    "registry name, 1-based index, comma list, or 'all'");
  auto* train_seed =
      train->add_option("--seed", opts.seed, "master training seed")
          ->required();

  auto* infer = app.add_subcommand(
      "infer", "print one expert's allocation on a seeded state");
  infer->add_option("--expert", opts.expert, "registry name or index");
  infer->add_option("--state-seed", opts.state_seed, "scenario draw seed");

  auto* gate =
      app.add_subcommand("gate", "run a query through the gate backend");
  gate->add_option("--query", opts.query, "operator query text");
  gate->add_option("--query-file", opts.query_file, "file with the query");
  gate->add_option("--set", opts.set_path,
                   "take query/library defaults from a simulation set");
  gate->add_option("--library", opts.library,
                   "library registry indices (default: all)")
      ->delimiter(',');
  auto* gate_state = gate->add_option(
      "--state-seed", opts.state_seed,
      "also run the selection on a generated state (off by default)");

  auto* bench = app.add_subcommand("bench", "run a simulation set");
  bench->add_option("--set", opts.set_path, "simulation set JSON")->required();
  bench->add_option("--seed", opts.seed, "run seed (overrides the set file)")
      ->required();

  auto* search = app.add_subcommand(
      "search", "exhaustive pairwise table for a set's library");
  search->add_option("--set", opts.set_path, "simulation set JSON")->required();
  auto* search_seed = search->add_option(
      "--seed", opts.seed, "state seed (default: the set file's)");

  auto* accuracy = app.add_subcommand(
      "accuracy", "score the gate on a labeled fixture corpus");
  accuracy->add_option("--fixtures", opts.fixtures_path, "fixture JSON")
      ->required();
  accuracy->add_option("--library", opts.library,
                       "library registry indices (default: all)")
      ->delimiter(',');

  auto* export_registry = app.add_subcommand(
      "export-registry", "print the expert registry as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  opts.seed_given = train_seed->count() > 0 || search_seed->count() > 0 ||
                    bench->count_all() > 0;
  opts.state_seed_given = gate_state->count() > 0;

  try {
    if (train->parsed()) return cmd_train(opts);
    if (infer->parsed()) return cmd_infer(opts);
    if (gate->parsed()) return cmd_gate(opts);
    if (bench->parsed()) return cmd_bench(opts);
    if (search->parsed()) return cmd_search(opts);
    if (accuracy->parsed()) return cmd_accuracy(opts);
    if (export_registry->parsed()) return cmd_export_registry(opts);
    std::cerr << "no subcommand given\n";
    return kExitUsage;
  } catch (const CredentialError& e) {
    std::cerr << "credential error: " << e.what() << "\n";
    return kExitCredential;
  } catch (const OutputError& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return kExitOutput;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const GateError& e) {
    std::cerr << "gate error: " << e.what() << "\n";
    return kExitGate;
  } catch (const TrainError& e) {
    std::cerr << "training error: " << e.what() << "\n";
    return kExitTrain;
  } catch (const IoError& e) {
    std::cerr << "missing input: " << e.what() << "\n";
    return kExitMissing;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
