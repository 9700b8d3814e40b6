#include "netmoe/objectives.hpp"

#include <cmath>
#include <limits>

#include "netmoe/errors.hpp"

namespace netmoe {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(UtilityFamily family) {
  switch (family) {
    case UtilityFamily::sum_rate: return "SumR";
    case UtilityFamily::min_rate: return "MinR";
    case UtilityFamily::log_rate: return "LogR";
    case UtilityFamily::max_delay: return "MaxT";
    case UtilityFamily::sum_delay: return "SumT";
  }
  return "?";
}

std::string to_string(Domain domain) {
  switch (domain) {
    case Domain::comm: return "Comm";
    case Domain::comp: return "Comp";
    case Domain::joint: return "JCC";
  }
  return "?";
}

UtilitySense UtilitySpec::sense() const {
  switch (family) {
    case UtilityFamily::sum_rate:
    case UtilityFamily::min_rate:
    case UtilityFamily::log_rate:
      return UtilitySense::maximize;
    case UtilityFamily::max_delay:
    case UtilityFamily::sum_delay:
      return UtilitySense::minimize;
  }
  return UtilitySense::maximize;
}

std::string UtilitySpec::name() const {
  return to_string(domain) + "_" + to_string(family) + "_" +
         (robust ? "Rob" : "Reg");
}

UtilitySpec spec_from_name(const std::string& name) {
  for (const auto& spec : enumerate_specs())
    if (spec.name() == name) return spec;
  throw ConfigError("unknown utility spec name: " + name);
}

double evaluate_utility(const UtilitySpec& spec, const PerUserMetrics& m) {
  const Eigen::VectorXd* rate = nullptr;
  const Eigen::VectorXd* delay = nullptr;
  switch (spec.domain) {
    case Domain::comm: rate = &m.r_tx; delay = &m.t_tx; break;
    case Domain::comp: rate = &m.r_co; delay = &m.t_co; break;
    case Domain::joint: rate = &m.r_joint; delay = &m.t_joint; break;
  }
  switch (spec.family) {
    case UtilityFamily::sum_rate:
      return rate->sum();
    case UtilityFamily::min_rate:
      return rate->minCoeff();
    case UtilityFamily::log_rate: {
      double acc = 0.0;
      for (Eigen::Index k = 0; k < rate->size(); ++k) {
        const double r = (*rate)(k);
        if (r <= 0.0) return -kInf;
        acc += std::log(r);
      }
      return acc;
    }
    case UtilityFamily::max_delay:
      return delay->maxCoeff();
    case UtilityFamily::sum_delay:
      return delay->sum();
  }
  return 0.0;
}

AllocKind variables_for(const UtilitySpec& spec) {
  switch (spec.domain) {
    case Domain::comm: return AllocKind::comm;
    case Domain::comp: return AllocKind::comp;
    case Domain::joint: return AllocKind::joint;
  }
  return AllocKind::joint;
}

std::string to_string(ConstraintTag tag) {
  switch (tag) {
    case ConstraintTag::d_comm: return "D_comm";
    case ConstraintTag::d_comp: return "D_comp";
    case ConstraintTag::d_joint: return "D_joint";
    case ConstraintTag::p_comm: return "P_comm";
    case ConstraintTag::p_comp: return "P_comp";
    case ConstraintTag::p_joint: return "P_joint";
    case ConstraintTag::t_comm: return "T_comm";
    case ConstraintTag::t_comp: return "T_comp";
    case ConstraintTag::t_joint: return "T_joint";
    case ConstraintTag::r_comm: return "R_comm";
    case ConstraintTag::r_comp: return "R_comp";
    case ConstraintTag::r_joint: return "R_joint";
  }
  return "?";
}

std::vector<ConstraintTag> constraint_tags(const UtilitySpec& spec) {
  std::vector<ConstraintTag> tags;
  const bool delay_family = spec.family == UtilityFamily::max_delay ||
                            spec.family == UtilityFamily::sum_delay;
  switch (spec.domain) {
    case Domain::comm:
      tags.push_back(ConstraintTag::d_comm);
      tags.push_back(ConstraintTag::p_comm);
      if (delay_family) tags.push_back(ConstraintTag::t_comm);
      if (spec.robust) tags.push_back(ConstraintTag::r_comm);
      break;
    case Domain::comp:
      tags.push_back(ConstraintTag::d_comp);
      tags.push_back(ConstraintTag::p_comp);
      if (delay_family) tags.push_back(ConstraintTag::t_comp);
      if (spec.robust) tags.push_back(ConstraintTag::r_comp);
      break;
    case Domain::joint:
      tags.push_back(ConstraintTag::d_joint);
      tags.push_back(ConstraintTag::p_joint);
      if (delay_family) tags.push_back(ConstraintTag::t_joint);
      if (spec.robust) tags.push_back(ConstraintTag::r_joint);
      break;
  }
  return tags;
}

std::vector<UtilitySpec> enumerate_specs() {
  std::vector<UtilitySpec> specs;
  specs.reserve(30);
  for (auto family : {UtilityFamily::sum_rate, UtilityFamily::min_rate,
                      UtilityFamily::log_rate, UtilityFamily::max_delay,
                      UtilityFamily::sum_delay})
    for (auto domain : {Domain::comm, Domain::comp, Domain::joint})
      for (bool robust : {false, true})
        specs.push_back(UtilitySpec{family, domain, robust});
  return specs;
}

}  // namespace netmoe
