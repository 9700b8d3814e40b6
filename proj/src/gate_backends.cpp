#include <algorithm>
#include <array>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string_view>

#include "netmoe/errors.hpp"
#include "netmoe/gate.hpp"
#include "netmoe/objectives.hpp"
#include "netmoe/rng.hpp"

// httplib after Eigen (pulled in via gate.hpp): its POSIX includes leak
// macros that break Eigen's template definitions when seen first.
#include <httplib.h>
#include <nlohmann/json.hpp>

namespace netmoe {

using nlohmann::json;

namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool contains(std::string_view hay, std::string_view needle) {
  return hay.find(needle) != std::string_view::npos;
}

bool any_of(std::string_view hay, std::initializer_list<std::string_view> cues) {
  for (auto cue : cues)
    if (contains(hay, cue)) return true;
  return false;
}

/// Lowercased clauses. Sentences split on punctuation; contrastive
/// conjunctions start a new clause but stay attached to it so weight markers
/// ("but also", "while maintaining") survive the split.
std::vector<std::string> split_clauses(const std::string& query) {
  std::string q = to_lower(query);
  for (std::string_view conj : {" but ", " while ", " whereas "}) {
    std::size_t pos = 0;
    while ((pos = q.find(conj, pos)) != std::string::npos) {
      q[pos] = '.';  // "a but b" -> "a. but b"
      pos += conj.size();
    }
  }
  std::vector<std::string> clauses;
  std::string cur;
  for (char c : q) {
    if (c == '.' || c == '!' || c == '?' || c == ';') {
      if (!cur.empty()) clauses.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) clauses.push_back(cur);
  return clauses;
}

struct DomainCues {
  bool comm = false;
  bool comp = false;
  bool joint_word = false;
};

DomainCues domain_cues(std::string_view clause) {
  DomainCues d;
  d.comm = any_of(clause, {"communicat", "transmi", "link", "channel",
                           "radio", "wireless", "spectrum"});
  d.comp = any_of(clause, {"comput", "render", "process", "workload", "cpu",
                           "server"});
  d.joint_word = any_of(clause, {"jointly", "joint ", "end-to-end"});
  return d;
}

bool robust_cue(std::string_view clause) {
  return any_of(clause, {"uncertain", "estimation error", "fluctuat",
                         "unpredictab", "robust", "resilient", "imperfect",
                         "noisy", "vary", "volatile"});
}

bool regular_cue(std::string_view clause) {
  return any_of(clause, {"perfect", "accurate", "regular", "error-free",
                         "reliable", "exact"});
}

bool primary_marker(std::string_view clause) {
  return any_of(clause, {"main", "primar", "most important", "must", "strict"});
}

bool secondary_marker(std::string_view clause) {
  return any_of(clause,
                {"but also", "should not", "should still", "still achieve",
                 "while maintaining", "maintain", "reasonable", "decent",
                 "not collapse", "however", "as well", "somewhat"});
}

struct ObjectiveHit {
  UtilityFamily family;
  std::size_t clause;
  DomainCues cues;
  Domain domain = Domain::joint;
};

std::string family_token(UtilityFamily f) {
  switch (f) {
    case UtilityFamily::sum_rate: return "SumR";
    case UtilityFamily::min_rate: return "MinR";
    case UtilityFamily::log_rate: return "LogR";
    case UtilityFamily::max_delay: return "MaxT";
    case UtilityFamily::sum_delay: return "SumT";
  }
  return {};
}

std::string domain_token(Domain d) {
  switch (d) {
    case Domain::comm: return "Comm";
    case Domain::comp: return "Comp";
    case Domain::joint: return "JCC";
  }
  return {};
}

std::string family_phrase(UtilityFamily f) {
  switch (f) {
    case UtilityFamily::sum_rate: return "throughput maximization";
    case UtilityFamily::min_rate: return "worst-user rate protection";
    case UtilityFamily::log_rate: return "balanced rate allocation";
    case UtilityFamily::max_delay: return "worst-case delay minimization";
    case UtilityFamily::sum_delay: return "total delay minimization";
  }
  return {};
}

std::string domain_phrase(Domain d) {
  switch (d) {
    case Domain::comm: return "communication";
    case Domain::comp: return "computing";
    case Domain::joint: return "joint communication and computing";
  }
  return {};
}

bool in_library(const std::vector<ExpertCard>& library, const std::string& name) {
  for (const auto& card : library)
    if (card.name == name) return true;
  return false;
}

json make_tool_response(const std::vector<std::pair<std::string, double>>& picks,
                        const std::string& interpretation) {
  json call;
  if (picks.size() == 1) {
    call = {{"name", kToolSingle},
            {"arguments", json{{"expert_name", picks[0].first}}}};
  } else if (picks.size() == 2) {
    call = {{"name", kToolPair},
            {"arguments", json{{"expert_name_1", picks[0].first},
                               {"expert_name_2", picks[1].first},
                               {"alpha_1", picks[0].second},
                               {"alpha_2", picks[1].second}}}};
  } else {
    json names = json::array(), alphas = json::array();
    for (const auto& [n, w] : picks) {
      names.push_back(n);
      alphas.push_back(w);
    }
    call = {{"name", "infer_weighted_experts_with_params"},
            {"arguments", json{{"expert_names", names}, {"alphas", alphas}}}};
  }
  return json{{"tool_calls", json::array({json{{"type", "function"},
                                               {"function", call}}})},
              {"content", interpretation}};
}

}  // namespace

std::string rule_backend_decide(const std::vector<ExpertCard>& library,
                                const std::string& query) {
  const std::vector<std::string> clauses = split_clauses(query);
  if (clauses.empty())
    throw GateError(GateErrorKind::clarification_needed,
                    "empty query; please state an optimization objective");

  // Query-level domain mentions and per-domain robustness flags. A
  // robustness cue scopes to the domains named in its clause; a clause
  // without a domain cue scopes to every domain. Robust wins over regular on
  // conflict (the safe side).
  bool mentioned_comm = false, mentioned_comp = false;
  bool comm_robust = false, comp_robust = false;
  bool comm_regular_seen = false, comp_regular_seen = false;
  for (const auto& clause : clauses) {
    const DomainCues d = domain_cues(clause);
    mentioned_comm |= d.comm;
    mentioned_comp |= d.comp;
    const bool wide = !d.comm && !d.comp;
    if (regular_cue(clause)) {
      if (d.comm || wide) comm_regular_seen = true;
      if (d.comp || wide) comp_regular_seen = true;
    }
    if (robust_cue(clause)) {
      if (d.comm || wide) comm_robust = true;
      if (d.comp || wide) comp_robust = true;
    }
  }
  (void)comm_regular_seen;
  (void)comp_regular_seen;

  // Objective detection, clause by clause, in query order.
  std::vector<ObjectiveHit> hits;
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    const std::string& clause = clauses[i];
    const DomainCues d = domain_cues(clause);
    const bool delay = any_of(clause, {"delay", "latency", "deadline",
                                       "response time", "finish within"});
    const bool total = any_of(clause, {"total", "overall", "aggregate",
                                       "combined", "sum of"});
    const bool fair =
        any_of(clause, {"fair", "equal", "minimum rate", "guaranteed minimum",
                        "weakest", "minimum rates"});
    const bool throughput = any_of(clause, {"throughput", "sum rate",
                                            "sum-rate", "data rate",
                                            "capacity"});
    const bool balanced = any_of(clause, {"balanc", "trade-off", "tradeoff",
                                          "proportional"});
    if (delay) {
      hits.push_back(
          {total ? UtilityFamily::sum_delay : UtilityFamily::max_delay, i, d});
    } else if (balanced) {
      hits.push_back({UtilityFamily::log_rate, i, d});
    } else if (fair) {
      hits.push_back({UtilityFamily::min_rate, i, d});
    }
    if (throughput && !balanced)
      hits.push_back({UtilityFamily::sum_rate, i, d});
  }
  // Same family firing from several clauses: keep the first occurrence.
  {
    std::vector<ObjectiveHit> unique;
    for (const auto& h : hits) {
      bool seen = false;
      for (const auto& u : unique) seen |= u.family == h.family;
      if (!seen) unique.push_back(h);
    }
    hits = std::move(unique);
  }
  if (hits.empty())
    throw GateError(GateErrorKind::clarification_needed,
                    "no objective recognized in query; please mention "
                    "throughput, fairness, balance, or delay goals");
  if (hits.size() > 2) hits.resize(2);  // the tools compose at most two goals

  // Domain resolution. Clause cues win; otherwise fall back to query-level
  // mentions, preferring a domain no other objective already claimed.
  for (std::size_t i = 0; i < hits.size(); ++i) {
    ObjectiveHit& h = hits[i];
    if (h.cues.comm && h.cues.comp) {
      h.domain = Domain::joint;
    } else if (h.cues.joint_word) {
      h.domain = Domain::joint;
    } else if (h.cues.comm) {
      h.domain = Domain::comm;
    } else if (h.cues.comp) {
      h.domain = Domain::comp;
    } else {
      std::set<Domain> claimed;
      for (std::size_t j = 0; j < hits.size(); ++j) {
        if (j == i) continue;
        const DomainCues& c = hits[j].cues;
        if (c.comm && !c.comp) claimed.insert(Domain::comm);
        if (c.comp && !c.comm) claimed.insert(Domain::comp);
      }
      std::set<Domain> unassigned;
      if (mentioned_comm && !claimed.count(Domain::comm))
        unassigned.insert(Domain::comm);
      if (mentioned_comp && !claimed.count(Domain::comp))
        unassigned.insert(Domain::comp);
      if (unassigned.size() == 1) {
        h.domain = *unassigned.begin();
      } else if (mentioned_comm != mentioned_comp) {
        h.domain = mentioned_comm ? Domain::comm : Domain::comp;
      } else {
        h.domain = Domain::joint;
      }
    }
  }

  // Weights: 0.6/0.4 when exactly one goal is marked primary (or the other
  // secondary), else an even split.
  std::vector<double> goal_weights(hits.size(),
                                   1.0 / static_cast<double>(hits.size()));
  if (hits.size() == 2) {
    const bool p0 = primary_marker(clauses[hits[0].clause]);
    const bool p1 = primary_marker(clauses[hits[1].clause]);
    const bool s0 = secondary_marker(clauses[hits[0].clause]);
    const bool s1 = secondary_marker(clauses[hits[1].clause]);
    int primary = -1;
    if (p0 != p1) primary = p0 ? 0 : 1;
    else if (s0 != s1) primary = s0 ? 1 : 0;
    if (primary == 0) goal_weights = {0.6, 0.4};
    if (primary == 1) goal_weights = {0.4, 0.6};
  }

  // Resolve names against the library. A joint expert missing from the
  // library decomposes into its comm+comp counterparts at split weight; a
  // missing single-domain expert upgrades to the joint one.
  const auto robust_for = [&](Domain d) {
    switch (d) {
      case Domain::comm: return comm_robust;
      case Domain::comp: return comp_robust;
      case Domain::joint: return comm_robust || comp_robust;
    }
    return false;
  };
  const auto expert_name = [&](Domain d, UtilityFamily f, bool rob) {
    return domain_token(d) + "_" + family_token(f) + "_" + (rob ? "Rob" : "Reg");
  };

  std::vector<std::pair<std::string, double>> picks;
  std::ostringstream why;
  why << "Query interpreted as";
  for (std::size_t i = 0; i < hits.size(); ++i) {
    const ObjectiveHit& h = hits[i];
    const bool rob = robust_for(h.domain);
    const std::string name = expert_name(h.domain, h.family, rob);
    why << (i ? " plus " : " ") << family_phrase(h.family) << " for "
        << domain_phrase(h.domain) << " under "
        << (rob ? "uncertain" : "regular") << " conditions";
    if (in_library(library, name)) {
      picks.emplace_back(name, goal_weights[i]);
      continue;
    }
    if (h.domain == Domain::joint) {
      const std::string comm_name =
          expert_name(Domain::comm, h.family, comm_robust);
      const std::string comp_name =
          expert_name(Domain::comp, h.family, comp_robust);
      if (in_library(library, comm_name) && in_library(library, comp_name)) {
        picks.emplace_back(comm_name, goal_weights[i] / 2.0);
        picks.emplace_back(comp_name, goal_weights[i] / 2.0);
        why << " (composed from per-domain experts)";
        continue;
      }
    } else {
      const std::string joint_name =
          expert_name(Domain::joint, h.family, robust_for(Domain::joint));
      if (in_library(library, joint_name)) {
        picks.emplace_back(joint_name, goal_weights[i]);
        why << " (served by the joint expert)";
        continue;
      }
    }
    throw GateError(GateErrorKind::unknown_expert,
                    "no library expert covers " + name);
  }
  why << ".";

  // Merge duplicates so the emitted call never names an expert twice.
  std::vector<std::pair<std::string, double>> merged;
  for (const auto& [name, w] : picks) {
    bool found = false;
    for (auto& m : merged)
      if (m.first == name) {
        m.second += w;
        found = true;
      }
    if (!found) merged.emplace_back(name, w);
  }

  return make_tool_response(merged, why.str()).dump();
}

namespace {

class RuleBackend final : public GateBackend {
 public:
  std::string decide(const std::string& system_prompt,
                     const std::string& query) override {
    return rule_backend_decide(parse_cards(system_prompt), query);
  }
  std::string id() const override { return "rule"; }

  /// The backend contract only passes the prompt, so the card list is
  /// recovered from its numbered lines ("N) Name: description").
  static std::vector<ExpertCard> parse_cards(const std::string& prompt) {
    std::vector<ExpertCard> cards;
    std::istringstream lines(prompt);
    std::string line;
    while (std::getline(lines, line)) {
      std::size_t pos = 0;
      while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos])))
        ++pos;
      if (pos == 0 || pos + 1 >= line.size() || line[pos] != ')' ||
          line[pos + 1] != ' ')
        continue;
      const std::size_t name_start = pos + 2;
      const std::size_t colon = line.find(": ", name_start);
      if (colon == std::string::npos) continue;
      ExpertCard card;
      card.index = std::atoi(line.substr(0, pos).c_str());
      card.name = line.substr(name_start, colon - name_start);
      card.description = line.substr(colon + 2);
      cards.push_back(std::move(card));
    }
    return cards;
  }
};

class ReplayBackend final : public GateBackend {
 public:
  explicit ReplayBackend(const std::string& store_path) : path_(store_path) {
    std::ifstream in(store_path);
    if (!in) throw IoError("replay store not found: " + store_path);
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw IoError("replay store " + store_path + ": " + e.what());
    }
    if (!doc.contains("entries") || !doc["entries"].is_array())
      throw IoError("replay store " + store_path + " lacks an entries array");
    for (const auto& entry : doc["entries"]) {
      if (!entry.contains("digest") || !entry.contains("response"))
        throw IoError("replay store entry lacks digest/response");
      responses_[entry["digest"].get<std::string>()] =
          entry["response"].dump();
    }
  }

  std::string decide(const std::string& system_prompt,
                     const std::string& query) override {
    std::vector<std::string> names;
    for (const auto& card : RuleBackend::parse_cards(system_prompt))
      names.push_back(card.name);
    const std::uint64_t digest = replay_digest(names, query);
    char key[19];
    std::snprintf(key, sizeof key, "0x%016llx",
                  static_cast<unsigned long long>(digest));
    const auto it = responses_.find(key);
    if (it == responses_.end())
      throw GateError(GateErrorKind::backend_unavailable,
                      std::string("no replay entry for digest ") + key +
                          " (query: " + query.substr(0, 60) + "...)");
    return it->second;
  }
  std::string id() const override { return "replay"; }

 private:
  std::string path_;
  std::map<std::string, std::string> responses_;
};

class HttpBackend final : public GateBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {}

  std::string decide(const std::string& system_prompt,
                     const std::string& query) override {
    // Credential resolved from the environment at call time; it is never
    // read from or written to any file.
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (!key || !*key)
      throw GateError(GateErrorKind::backend_unavailable,
                      "credential environment variable " + cfg_.api_key_env +
                          " is not set");

    json body;
    body["model"] = cfg_.model;
    body["temperature"] = cfg_.temperature;
    body["messages"] = json::array(
        {json{{"role", "system"}, {"content", system_prompt}},
         json{{"role", "user"}, {"content", query}}});
    body["tools"] = tool_schemas();
    body["tool_choice"] = "required";
    const std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      httplib::Client client(cfg_.base_url);
      client.set_connection_timeout(cfg_.timeout_s, 0);
      client.set_read_timeout(cfg_.timeout_s, 0);
      client.set_bearer_token_auth(key);
      auto res = client.Post("/v1/chat/completions", payload,
                             "application/json");
      if (res && res->status >= 200 && res->status < 300) return res->body;
      if (res)
        last_error = "HTTP " + std::to_string(res->status) + ": " +
                     res->body.substr(0, 200);
      else
        last_error = "transport error " + httplib::to_string(res.error());
    }
    throw GateError(GateErrorKind::backend_unavailable,
                    "gate endpoint unreachable after " +
                        std::to_string(cfg_.max_retries + 1) + " attempts: " +
                        last_error);
  }
  std::string id() const override { return "http"; }

 private:
  static json tool_schemas() {
    const json single = {
        {"type", "function"},
        {"function",
         {{"name", kToolSingle},
          {"description",
           "Infer the single named expert and return its allocation."},
          {"parameters",
           {{"type", "object"},
            {"properties",
             {{"expert_name",
               {{"type", "string"},
                {"description", "One of the listed expert names."}}}}},
            {"required", json::array({"expert_name"})}}}}}};
    const json pair = {
        {"type", "function"},
        {"function",
         {{"name", kToolPair},
          {"description",
           "Combine two experts with weights alpha_1 + alpha_2 = 1."},
          {"parameters",
           {{"type", "object"},
            {"properties",
             {{"expert_name_1", {{"type", "string"}}},
              {"expert_name_2", {{"type", "string"}}},
              {"alpha_1", {{"type", "number"}}},
              {"alpha_2", {{"type", "number"}}}}},
            {"required", json::array({"expert_name_1", "expert_name_2",
                                      "alpha_1", "alpha_2"})}}}}}};
    const json nary = {
        {"type", "function"},
        {"function",
         {{"name", "infer_weighted_experts_with_params"},
          {"description",
           "Experimental: combine any number of experts with simplex "
           "weights."},
          {"parameters",
           {{"type", "object"},
            {"properties",
             {{"expert_names",
               {{"type", "array"}, {"items", {{"type", "string"}}}}},
              {"alphas",
               {{"type", "array"}, {"items", {{"type", "number"}}}}}}},
            {"required", json::array({"expert_names", "alphas"})}}}}}};
    return json::array({single, pair, nary});
  }

  HttpBackendConfig cfg_;
};

}  // namespace

std::uint64_t replay_digest(const std::vector<std::string>& library_names,
                            const std::string& query) {
  std::string blob;
  for (std::size_t i = 0; i < library_names.size(); ++i) {
    if (i) blob += ",";
    blob += library_names[i];
  }
  blob += "\n";
  blob += query;
  return fnv1a64(blob);
}

std::unique_ptr<GateBackend> make_rule_backend() {
  return std::make_unique<RuleBackend>();
}

std::unique_ptr<GateBackend> make_replay_backend(const std::string& store_path) {
  return std::make_unique<ReplayBackend>(store_path);
}

std::unique_ptr<GateBackend> make_http_backend(const HttpBackendConfig& http) {
  return std::make_unique<HttpBackend>(http);
}

}  // namespace netmoe
