#pragma once

#include <stdexcept>
#include <string>

namespace netmoe {

/// Invalid or inconsistent system configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Model/registry file that cannot be read or does not match the live config.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training diverged or was asked to run with an unusable setup.
struct TrainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class GateErrorKind {
  backend_unavailable,   // transport failure / missing credential
  malformed_response,    // response is not a well-formed tool call
  unknown_expert,        // tool call names an expert outside the library
  weight_out_of_range,   // a combination weight escapes [0, 1]
  weight_sum,            // weights do not sum to one (beyond tolerance)
  clarification_needed,  // query carries no usable intent
};

/// Selection failure; `kind` tells callers which contract was violated.
struct GateError : std::runtime_error {
  GateError(GateErrorKind k, const std::string& what)
      : std::runtime_error(what), kind(k) {}
  GateErrorKind kind;
};

}  // namespace netmoe
