#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "netmoe/errors.hpp"
#include "netmoe/objectives.hpp"

using namespace netmoe;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// fixed figure set with distinct values per column so a wrong column pick
// cannot pass by coincidence
PerUserMetrics crafted() {
  PerUserMetrics m;
  m.r_tx = Eigen::Vector4d(8.0, 2.0, 4.0, 6.0);
  m.r_co = Eigen::Vector4d(1.0, 5.0, 3.0, 7.0);
  m.r_joint = m.r_tx + m.r_co;
  m.t_tx = Eigen::Vector4d(0.5, 0.125, 0.25, 2.0);
  m.t_co = Eigen::Vector4d(0.75, 1.5, 0.0625, 4.0);
  m.t_joint = m.t_tx + m.t_co;
  return m;
}

UtilitySpec spec(UtilityFamily family, Domain domain, bool robust = false) {
  return UtilitySpec{family, domain, robust};
}

}  // namespace

TEST_CASE("each family reduces the right column to the right scalar") {
  const PerUserMetrics m = crafted();

  CHECK(evaluate_utility(spec(UtilityFamily::sum_rate, Domain::comm), m) == 20.0);
  CHECK(evaluate_utility(spec(UtilityFamily::sum_rate, Domain::comp), m) == 16.0);
  CHECK(evaluate_utility(spec(UtilityFamily::sum_rate, Domain::joint), m) == 36.0);

  CHECK(evaluate_utility(spec(UtilityFamily::min_rate, Domain::comm), m) == 2.0);
  CHECK(evaluate_utility(spec(UtilityFamily::min_rate, Domain::comp), m) == 1.0);
  CHECK(evaluate_utility(spec(UtilityFamily::min_rate, Domain::joint), m) == 7.0);

  const double log_comm =
      std::log(8.0) + std::log(2.0) + std::log(4.0) + std::log(6.0);
  CHECK(evaluate_utility(spec(UtilityFamily::log_rate, Domain::comm), m) ==
        doctest::Approx(log_comm).epsilon(1e-15));
  const double log_joint =
      std::log(9.0) + std::log(7.0) + std::log(7.0) + std::log(13.0);
  CHECK(evaluate_utility(spec(UtilityFamily::log_rate, Domain::joint), m) ==
        doctest::Approx(log_joint).epsilon(1e-15));

  CHECK(evaluate_utility(spec(UtilityFamily::max_delay, Domain::comm), m) == 2.0);
  CHECK(evaluate_utility(spec(UtilityFamily::max_delay, Domain::comp), m) == 4.0);
  CHECK(evaluate_utility(spec(UtilityFamily::max_delay, Domain::joint), m) == 6.0);

  CHECK(evaluate_utility(spec(UtilityFamily::sum_delay, Domain::comm), m) ==
        doctest::Approx(2.875).epsilon(1e-15));
  CHECK(evaluate_utility(spec(UtilityFamily::sum_delay, Domain::comp), m) ==
        doctest::Approx(6.3125).epsilon(1e-15));
}

TEST_CASE("degenerate figures propagate to the score") {
  PerUserMetrics m = crafted();
  m.r_co(2) = 0.0;
  m.t_co(2) = kInf;
  m.r_joint = m.r_tx + m.r_co;
  m.t_joint = m.t_tx + m.t_co;

  CHECK(evaluate_utility(spec(UtilityFamily::log_rate, Domain::comp), m) == -kInf);
  CHECK(evaluate_utility(spec(UtilityFamily::max_delay, Domain::comp), m) == kInf);
  CHECK(evaluate_utility(spec(UtilityFamily::sum_delay, Domain::joint), m) == kInf);
  // other columns are untouched
  CHECK(evaluate_utility(spec(UtilityFamily::sum_rate, Domain::comm), m) == 20.0);
  CHECK(std::isfinite(
      evaluate_utility(spec(UtilityFamily::log_rate, Domain::joint), m)));
}

TEST_CASE("sense: rates up, delays down") {
  for (auto domain : {Domain::comm, Domain::comp, Domain::joint}) {
    CHECK(spec(UtilityFamily::sum_rate, domain).sense() == UtilitySense::maximize);
    CHECK(spec(UtilityFamily::min_rate, domain).sense() == UtilitySense::maximize);
    CHECK(spec(UtilityFamily::log_rate, domain).sense() == UtilitySense::maximize);
    CHECK(spec(UtilityFamily::max_delay, domain).sense() == UtilitySense::minimize);
    CHECK(spec(UtilityFamily::sum_delay, domain).sense() == UtilitySense::minimize);
  }
}

TEST_CASE("variables follow the domain") {
  CHECK(variables_for(spec(UtilityFamily::sum_rate, Domain::comm)) ==
        AllocKind::comm);
  CHECK(variables_for(spec(UtilityFamily::max_delay, Domain::comp)) ==
        AllocKind::comp);
  CHECK(variables_for(spec(UtilityFamily::log_rate, Domain::joint)) ==
        AllocKind::joint);
}

TEST_CASE("constraint tags") {
  auto tags = constraint_tags(spec(UtilityFamily::sum_rate, Domain::comm));
  REQUIRE(tags.size() == 2);
  CHECK(to_string(tags[0]) == "D_comm");
  CHECK(to_string(tags[1]) == "P_comm");

  tags = constraint_tags(spec(UtilityFamily::max_delay, Domain::joint, true));
  REQUIRE(tags.size() == 4);
  CHECK(to_string(tags[0]) == "D_joint");
  CHECK(to_string(tags[1]) == "P_joint");
  CHECK(to_string(tags[2]) == "T_joint");
  CHECK(to_string(tags[3]) == "R_joint");

  tags = constraint_tags(spec(UtilityFamily::min_rate, Domain::comp, true));
  REQUIRE(tags.size() == 3);
  CHECK(to_string(tags[2]) == "R_comp");
}

TEST_CASE("names round-trip and order matches the registry layout") {
  const auto specs = enumerate_specs();
  REQUIRE(specs.size() == 30);

  // block layout: family-major, within a block comm/comp/joint x reg/rob
  CHECK(specs[0].name() == "Comm_SumR_Reg");
  CHECK(specs[1].name() == "Comm_SumR_Rob");
  CHECK(specs[2].name() == "Comp_SumR_Reg");
  CHECK(specs[3].name() == "Comp_SumR_Rob");
  CHECK(specs[4].name() == "JCC_SumR_Reg");
  CHECK(specs[5].name() == "JCC_SumR_Rob");
  CHECK(specs[6].name() == "Comm_MinR_Reg");
  CHECK(specs[12].name() == "Comm_LogR_Reg");
  CHECK(specs[18].name() == "Comm_MaxT_Reg");
  CHECK(specs[24].name() == "Comm_SumT_Reg");
  CHECK(specs[29].name() == "JCC_SumT_Rob");

  for (const auto& s : specs) {
    const UtilitySpec back = spec_from_name(s.name());
    CHECK(back == s);
  }

  CHECK_THROWS_AS(spec_from_name("JCC_Fast_Reg"), ConfigError);
  CHECK_THROWS_AS(spec_from_name(""), ConfigError);
  CHECK_THROWS_AS(spec_from_name("jcc_sumr_reg"), ConfigError);
}

TEST_CASE("string forms") {
  CHECK(to_string(UtilityFamily::sum_rate) == "SumR");
  CHECK(to_string(UtilityFamily::min_rate) == "MinR");
  CHECK(to_string(UtilityFamily::log_rate) == "LogR");
  CHECK(to_string(UtilityFamily::max_delay) == "MaxT");
  CHECK(to_string(UtilityFamily::sum_delay) == "SumT");
  CHECK(to_string(Domain::comm) == "Comm");
  CHECK(to_string(Domain::comp) == "Comp");
  CHECK(to_string(Domain::joint) == "JCC");
}
