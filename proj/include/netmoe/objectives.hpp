#pragma once

#include <string>
#include <vector>

#include "netmoe/netmodel.hpp"

namespace netmoe {

/// The five utility families. Rate families are maximized, delay families
/// minimized.
enum class UtilityFamily { sum_rate, min_rate, log_rate, max_delay, sum_delay };

/// Which side of the network a utility scores.
enum class Domain { comm, comp, joint };

enum class UtilitySense { maximize, minimize };

std::string to_string(UtilityFamily family);
std::string to_string(Domain domain);

/// One optimization target: a family applied to a domain, optionally in its
/// robust (quantile) form.
struct UtilitySpec {
  UtilityFamily family = UtilityFamily::sum_rate;
  Domain domain = Domain::comm;
  bool robust = false;

  UtilitySense sense() const;

  /// Canonical registry name, e.g. "JCC_MaxT_Rob".
  std::string name() const;

  bool operator==(const UtilitySpec&) const = default;
};

/// Parse a canonical name back into a spec; throws ConfigError on junk.
UtilitySpec spec_from_name(const std::string& name);

/// Value of the utility on precomputed per-user metrics. Uses the domain's
/// rate/delay columns; log_rate returns -inf when any user's rate is zero,
/// and delay families return +inf when any user's delay is infinite.
double evaluate_utility(const UtilitySpec& spec, const PerUserMetrics& m);

/// Resource variables an expert for this spec controls.
AllocKind variables_for(const UtilitySpec& spec);

/// Constraint groups attached to a spec. Naming: D = per-user variable
/// domains, P = power budgets, T = delay budget enters the objective, R =
/// robustness (quantile evaluation). Suffix is the domain the group binds.
enum class ConstraintTag {
  d_comm, d_comp, d_joint,
  p_comm, p_comp, p_joint,
  t_comm, t_comp, t_joint,
  r_comm, r_comp, r_joint,
};

std::string to_string(ConstraintTag tag);

std::vector<ConstraintTag> constraint_tags(const UtilitySpec& spec);

/// All 30 registry specs in canonical order: families in the order declared
/// above; within a family comm reg, comm rob, comp reg, comp rob, joint reg,
/// joint rob.
std::vector<UtilitySpec> enumerate_specs();

}  // namespace netmoe
