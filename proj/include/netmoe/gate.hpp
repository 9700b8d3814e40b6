#pragma once

#include <memory>
#include <string>
#include <vector>

#include "netmoe/experts.hpp"
#include "netmoe/netmodel.hpp"

namespace netmoe {

/// Selection card for one library expert: the text the gate reasons over.
struct ExpertCard {
  int index = 0;  // registry index
  std::string name;
  std::string description;
};

ExpertCard make_expert_card(const ExpertRecord& rec);

/// Outcome of one gate call: which experts to run and how to blend them.
struct GateDecision {
  std::vector<int> selected;         // positions into the library card list
  std::vector<std::string> names;    // expert names, same order
  std::vector<double> weights;       // nonnegative, sum to 1
  std::string interpretation;        // backend's short reading of the query
  std::string raw_response;          // verbatim backend output
  double backend_latency_s = 0.0;
};

/// System prompt shown to the backend: scenario description, the numbered
/// expert cards, and the tool contract.
std::string build_system_prompt(const std::vector<ExpertCard>& library);

/// Tool names a backend may call.
inline constexpr const char* kToolSingle = "infer_expert_with_params";
inline constexpr const char* kToolPair = "infer_two_weighted_experts_with_params";

/// Strict parse of a backend response into a decision. Accepts a full
/// chat-completions body, a bare {"tool_calls": [...]} object, or a single
/// {"name", "arguments"} call; arguments may be an object or a JSON-encoded
/// string. Throws GateError with the precise kind on unknown experts,
/// malformed calls, out-of-range weights, or weight sums beyond 1e-2 (smaller
/// deviations are renormalized).
GateDecision parse_tool_call(const std::string& raw,
                             const std::vector<ExpertCard>& library);

/// A gate backend turns (system prompt, operator query) into a raw tool-call
/// response. Implementations must not look at anything else.
class GateBackend {
 public:
  virtual ~GateBackend() = default;
  virtual std::string decide(const std::string& system_prompt,
                             const std::string& query) = 0;
  virtual std::string id() const = 0;
};

/// Deterministic keyword-scoring stand-in for the LLM. Same query + library
/// always yields the same call.
std::string rule_backend_decide(const std::vector<ExpertCard>& library,
                                const std::string& query);

std::unique_ptr<GateBackend> make_rule_backend();

/// Replays canned responses recorded in a JSON store keyed by a digest of
/// (library names, query). Throws GateError{backend_unavailable} on a miss.
std::unique_ptr<GateBackend> make_replay_backend(const std::string& store_path);

/// Key used by the replay store.
std::uint64_t replay_digest(const std::vector<std::string>& library_names,
                            const std::string& query);

struct HttpBackendConfig {
  std::string base_url = "http://localhost:8080";
  std::string model = "gpt-4o";
  std::string api_key_env = "NETMOE_API_KEY";  // name of the env var, never a key
  double temperature = 0.0;
  int timeout_s = 30;
  int max_retries = 2;
};

/// Chat-completions client with function-calling. The credential is read
/// from the environment variable named in the config at call time.
std::unique_ptr<GateBackend> make_http_backend(const HttpBackendConfig& http);

/// Full selection round trip: prompt the backend, parse, validate against the
/// library, record latency and transcript.
GateDecision decide(GateBackend& backend, const std::vector<ExpertCard>& library,
                    const std::string& query);

/// Blend member allocations with the decision weights. Transmit powers and
/// CPU splits mix linearly; CPU power is re-derived from the mixed split so
/// the power/frequency coupling stays exact. Result kind is the union of the
/// members' active variables.
Allocation combine(const GateDecision& decision,
                   const std::vector<Allocation>& member_allocs,
                   const SystemConfig& cfg);

/// Labeled query with its reference selection.
struct GateFixture {
  std::string query;
  std::vector<std::string> expert_names;  // reference selection
  std::vector<double> weights;            // reference weights, same order
  std::string note;
};

std::vector<GateFixture> load_fixtures(const std::string& path);

struct FixtureOutcome {
  std::string query;
  bool selection_exact = false;  // same expert set, order-insensitive
  bool full_match = false;       // selection exact and each weight within 0.1
  bool failed = false;           // backend or parse error
  std::string detail;
};

struct AccuracyReport {
  int total = 0;
  int selection_exact = 0;
  int full_match = 0;
  int failures = 0;
  double mean_latency_s = 0.0;
  std::vector<FixtureOutcome> outcomes;

  double selection_rate() const {
    return total ? static_cast<double>(selection_exact) / total : 0.0;
  }
};

/// Run every fixture through the backend and score selections against the
/// references.
AccuracyReport evaluate_gate_accuracy(GateBackend& backend,
                                      const std::vector<ExpertCard>& library,
                                      const std::vector<GateFixture>& fixtures);

}  // namespace netmoe
