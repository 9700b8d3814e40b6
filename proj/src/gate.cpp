#include "netmoe/gate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "netmoe/errors.hpp"
#include "netmoe/rng.hpp"

namespace netmoe {

using nlohmann::json;

ExpertCard make_expert_card(const ExpertRecord& rec) {
  return ExpertCard{rec.index, rec.name, rec.description};
}

std::string build_system_prompt(const std::vector<ExpertCard>& library) {
  if (library.empty()) throw ConfigError("build_system_prompt: empty library");
  std::ostringstream out;
  out << "You are a helpful assistant that receive requests in natural "
         "language and then, based on the provided context you must choose "
         "one or a combination of suitable expert tools which can resolve "
         "the query asked. You operate as an intelligent assistant embedded "
         "within a wireless network operator environment. You are "
         "functioning as a router/gate network that receives a query or a "
         "question from the network operator and your task is to route the "
         "question to an optimization expert.\n\n";
  out << "You have " << library.size()
      << " experts that can be used to resolve queries either by their own "
         "or on combinations. This depends on the query if the requested "
         "information need to be a combination of the results from several "
         "experts or one expert can fully address the query. This can be "
         "solely determined by the description of each expert area of "
         "expertise. Here is a detailed description of the available experts "
         "and their area of specialization:\n";
  for (std::size_t i = 0; i < library.size(); ++i)
    out << i + 1 << ") " << library[i].name << ": " << library[i].description
        << "\n";
  out << "\nThe available tools for the router are listed below:\n";
  out << kToolSingle
      << ": This function take a string as expert name and based on this "
         "input it infers the correct expert with given parameters and "
         "return a tuple of three parameters. The expert name is a string "
         "that can be chosen of a set of specific available expert names.\n";
  out << kToolPair
      << ": This function take two strings as expert names and two numeric "
         "parameters alpha_1 and alpha_2 where alpha_1 + alpha_2 = 1. Based "
         "on these input parameters the function combine the inference "
         "results from the two given experts with the weighting parameters "
         "alpha_1 and alpha_2 and return a tuple of three parameters. The "
         "expert name is a string that can be chosen of a set of specific "
         "available expert names.\n";
  return out.str();
}

namespace {

json parse_json_or_throw(const std::string& raw, GateErrorKind kind) {
  try {
    return json::parse(raw);
  } catch (const json::exception& e) {
    throw GateError(kind, std::string("response is not JSON: ") + e.what());
  }
}

/// Arguments may arrive as an object or as a JSON-encoded string (the
/// chat-completions wire format uses the latter).
json decode_arguments(const json& args) {
  if (args.is_object()) return args;
  if (args.is_string()) {
    try {
      return json::parse(args.get<std::string>());
    } catch (const json::exception& e) {
      throw GateError(GateErrorKind::malformed_response,
                      std::string("tool arguments not decodable: ") + e.what());
    }
  }
  throw GateError(GateErrorKind::malformed_response,
                  "tool arguments must be an object or encoded string");
}

struct RawCall {
  std::string tool;
  json args;
};

/// Pull the single tool call out of whichever envelope the backend used.
RawCall extract_call(const json& body) {
  const json* calls = nullptr;
  const json* message = nullptr;
  if (body.contains("choices") && body["choices"].is_array() &&
      !body["choices"].empty()) {
    const json& choice = body["choices"][0];
    if (choice.contains("message")) message = &choice["message"];
    if (message && message->contains("tool_calls"))
      calls = &(*message)["tool_calls"];
  } else if (body.contains("tool_calls")) {
    calls = &body["tool_calls"];
  }

  json call;
  if (calls) {
    if (!calls->is_array() || calls->size() != 1)
      throw GateError(GateErrorKind::malformed_response,
                      "expected exactly one tool call, got " +
                          std::to_string(calls->is_array() ? calls->size() : 0));
    call = (*calls)[0];
  } else {
    call = body;  // bare {"name": ..., "arguments": ...}
  }

  if (call.contains("function")) call = call["function"];
  if (!call.contains("name") || !call["name"].is_string() ||
      !call.contains("arguments"))
    throw GateError(GateErrorKind::malformed_response,
                    "tool call lacks name/arguments");
  return RawCall{call["name"].get<std::string>(),
                 decode_arguments(call["arguments"])};
}

double read_weight(const json& args, const std::string& key) {
  if (!args.contains(key) || !args[key].is_number())
    throw GateError(GateErrorKind::malformed_response,
                    "missing numeric argument " + key);
  return args[key].get<double>();
}

std::string read_name(const json& args, const std::string& key) {
  if (!args.contains(key) || !args[key].is_string())
    throw GateError(GateErrorKind::malformed_response,
                    "missing string argument " + key);
  return args[key].get<std::string>();
}

std::string extract_content(const json& body) {
  if (body.contains("choices") && body["choices"].is_array() &&
      !body["choices"].empty()) {
    const json& msg = body["choices"][0].value("message", json::object());
    if (msg.contains("content") && msg["content"].is_string())
      return msg["content"].get<std::string>();
  }
  if (body.contains("content") && body["content"].is_string())
    return body["content"].get<std::string>();
  return {};
}

}  // namespace

GateDecision parse_tool_call(const std::string& raw,
                             const std::vector<ExpertCard>& library) {
  const json body = parse_json_or_throw(raw, GateErrorKind::malformed_response);
  const RawCall call = extract_call(body);

  std::vector<std::string> names;
  std::vector<double> weights;
  if (call.tool == kToolSingle) {
    names.push_back(read_name(call.args, "expert_name"));
    weights.push_back(1.0);
  } else if (call.tool == kToolPair) {
    names.push_back(read_name(call.args, "expert_name_1"));
    names.push_back(read_name(call.args, "expert_name_2"));
    weights.push_back(read_weight(call.args, "alpha_1"));
    weights.push_back(read_weight(call.args, "alpha_2"));
  } else if (call.tool == "infer_weighted_experts_with_params") {
    // n-ary generalization; experimental but accepted with the same rules.
    if (!call.args.contains("expert_names") ||
        !call.args["expert_names"].is_array() ||
        !call.args.contains("alphas") || !call.args["alphas"].is_array() ||
        call.args["expert_names"].size() != call.args["alphas"].size() ||
        call.args["expert_names"].empty())
      throw GateError(GateErrorKind::malformed_response,
                      "n-ary call needs aligned expert_names/alphas arrays");
    for (const auto& n : call.args["expert_names"]) {
      if (!n.is_string())
        throw GateError(GateErrorKind::malformed_response,
                        "expert_names entries must be strings");
      names.push_back(n.get<std::string>());
    }
    for (const auto& w : call.args["alphas"]) {
      if (!w.is_number())
        throw GateError(GateErrorKind::malformed_response,
                        "alphas entries must be numbers");
      weights.push_back(w.get<double>());
    }
  } else {
    throw GateError(GateErrorKind::malformed_response,
                    "unknown tool: " + call.tool);
  }

  for (double w : weights)
    if (!(w >= 0.0 && w <= 1.0))
      throw GateError(GateErrorKind::weight_out_of_range,
                      "weight outside [0, 1]: " + std::to_string(w));
  double sum = 0.0;
  for (double w : weights) sum += w;
  if (std::abs(sum - 1.0) > 0.01)
    throw GateError(GateErrorKind::weight_sum,
                    "weights sum to " + std::to_string(sum));

  // Resolve against the library, merging duplicates and dropping zero-weight
  // picks so that alpha > 0 iff selected.
  std::map<int, double> by_position;
  for (std::size_t i = 0; i < names.size(); ++i) {
    int position = -1;
    for (std::size_t p = 0; p < library.size(); ++p)
      if (library[p].name == names[i]) {
        position = static_cast<int>(p);
        break;
      }
    if (position < 0)
      throw GateError(GateErrorKind::unknown_expert,
                      "expert not in library: " + names[i]);
    by_position[position] += weights[i] / sum;
  }

  GateDecision decision;
  for (const auto& [position, weight] : by_position) {
    if (weight <= 0.0) continue;
    decision.selected.push_back(position);
    decision.names.push_back(library[static_cast<std::size_t>(position)].name);
    decision.weights.push_back(weight);
  }
  if (decision.selected.empty())
    throw GateError(GateErrorKind::malformed_response,
                    "no expert left after dropping zero weights");
  decision.interpretation = extract_content(body);
  decision.raw_response = raw;
  return decision;
}

GateDecision decide(GateBackend& backend, const std::vector<ExpertCard>& library,
                    const std::string& query) {
  const std::string prompt = build_system_prompt(library);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string raw = backend.decide(prompt, query);
  const double latency =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  GateDecision decision = parse_tool_call(raw, library);
  decision.backend_latency_s = latency;
  return decision;
}

Allocation combine(const GateDecision& decision,
                   const std::vector<Allocation>& member_allocs,
                   const SystemConfig& cfg) {
  if (member_allocs.size() != decision.weights.size() || member_allocs.empty())
    throw ConfigError("combine: allocations misaligned with decision");
  const int k = cfg.num_users;
  bool any_tx = false, any_co = false;
  Eigen::VectorXd p_tx = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd f_co = Eigen::VectorXd::Zero(k);
  for (std::size_t i = 0; i < member_allocs.size(); ++i) {
    const Allocation& a = member_allocs[i];
    const double w = decision.weights[i];
    if (a.kind != AllocKind::comp) {
      if (a.p_tx.size() != k) throw ConfigError("combine: p_tx size mismatch");
      p_tx += w * a.p_tx;
      any_tx = true;
    }
    if (a.kind != AllocKind::comm) {
      if (a.f_co.size() != k) throw ConfigError("combine: f_co size mismatch");
      f_co += w * a.f_co;
      any_co = true;
    }
  }
  Allocation out;
  out.kind = any_tx && any_co ? AllocKind::joint
                              : (any_tx ? AllocKind::comm : AllocKind::comp);
  out.p_tx = p_tx;
  out.f_co = f_co;
  out.p_co = any_co ? cpu_power_required(f_co, cfg) : 0.0;
  return out;
}

std::vector<GateFixture> load_fixtures(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_fixtures: cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw IoError("load_fixtures: " + path + ": " + e.what());
  }
  if (!doc.contains("fixtures") || !doc["fixtures"].is_array())
    throw IoError("load_fixtures: " + path + " lacks a fixtures array");
  std::vector<GateFixture> fixtures;
  for (const auto& row : doc["fixtures"]) {
    GateFixture f;
    try {
      f.query = row.at("query").get<std::string>();
      f.expert_names = row.at("experts").get<std::vector<std::string>>();
      f.weights = row.at("weights").get<std::vector<double>>();
      f.note = row.value("note", std::string{});
    } catch (const json::exception& e) {
      throw IoError(std::string("load_fixtures: bad record: ") + e.what());
    }
    if (f.expert_names.size() != f.weights.size() || f.expert_names.empty())
      throw IoError("load_fixtures: experts/weights misaligned for query: " +
                    f.query);
    fixtures.push_back(std::move(f));
  }
  return fixtures;
}

AccuracyReport evaluate_gate_accuracy(GateBackend& backend,
                                      const std::vector<ExpertCard>& library,
                                      const std::vector<GateFixture>& fixtures) {
  if (fixtures.empty()) throw ConfigError("evaluate_gate_accuracy: no fixtures");
  AccuracyReport report;
  report.total = static_cast<int>(fixtures.size());
  double latency_sum = 0.0;
  int latency_count = 0;

  for (const auto& fixture : fixtures) {
    FixtureOutcome outcome;
    outcome.query = fixture.query;
    try {
      const GateDecision decision = decide(backend, library, fixture.query);
      latency_sum += decision.backend_latency_s;
      ++latency_count;

      // Order-insensitive comparison: align reference weights by name.
      std::map<std::string, double> got, want;
      for (std::size_t i = 0; i < decision.names.size(); ++i)
        got[decision.names[i]] = decision.weights[i];
      for (std::size_t i = 0; i < fixture.expert_names.size(); ++i)
        want[fixture.expert_names[i]] = fixture.weights[i];

      bool same_set = got.size() == want.size();
      bool weights_ok = true;
      if (same_set) {
        for (const auto& [name, w_ref] : want) {
          auto it = got.find(name);
          if (it == got.end()) {
            same_set = false;
            break;
          }
          if (std::abs(it->second - w_ref) > 0.1) weights_ok = false;
        }
      }
      outcome.selection_exact = same_set;
      outcome.full_match = same_set && weights_ok;
      if (!same_set) {
        std::string names;
        for (const auto& n : decision.names) names += n + " ";
        outcome.detail = "selected: " + names;
      }
    } catch (const GateError& e) {
      outcome.failed = true;
      outcome.detail = e.what();
    }
    report.selection_exact += outcome.selection_exact ? 1 : 0;
    report.full_match += outcome.full_match ? 1 : 0;
    report.outcomes.push_back(std::move(outcome));
  }
  // Failures are everything that missed the reference set, including hard
  // backend errors (the scoring treats partially-correct picks as misses).
  report.failures = report.total - report.selection_exact;
  report.mean_latency_s = latency_count ? latency_sum / latency_count : 0.0;
  return report;
}

}  // namespace netmoe
