#pragma once

// Brute-force and Monte-Carlo oracles for the planning kernels, the
// confidence radii and the lane samplers, plus named checks built on them.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "switching/confidence.hpp"
#include "switching/planner.hpp"

namespace switching {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Dense linear program: minimise c.x subject to rows and x >= 0.
struct LinearProgram {
  enum class Sense { le, ge, eq };
  std::vector<double> c;
  std::vector<std::vector<double>> rows;
  std::vector<Sense> sense;
  std::vector<double> rhs;
};

struct LpSolution {
  double value = 0.0;
  std::vector<double> x;
};

/// Two-phase tableau simplex with Bland's rule. Empty when infeasible or
/// unbounded.
std::optional<LpSolution> solve_lp(const LinearProgram& lp);

/// min w.x over the simplex with ||x - b||_1 <= r, posed as an LP in (x, u).
double l1_min_by_lp(const std::vector<double>& weights, const std::vector<double>& center, double radius);

/// E_{trajectory}[total cost] of a switching policy from (s, d0), by summing
/// over every action/state path forward in time.
double enumerate_policy_value(const SwitchingPolicy& policy, const SwitchingModel& model, const CostParams& costs,
                              StateId s, AgentId d0);

CheckResult check_l1_kernel(std::size_t trials, std::uint64_t seed);
CheckResult check_dp_enumeration(std::size_t instances, std::uint64_t seed);
CheckResult check_zero_radius(std::size_t instances, std::uint64_t seed);
CheckResult check_optimism(std::size_t instances, std::uint64_t seed);
CheckResult check_coverage(std::size_t trials, std::uint64_t seed);
/// Chi-square agreement between the exact distribution and n draws for each
/// random input. The chi-square tail probability is mapped to a one-sided
/// normal score and must not exceed 3.
CheckResult check_human_sampler(std::size_t inputs, std::size_t samples, std::uint64_t seed);
CheckResult check_env_sampler(std::size_t inputs, std::size_t samples, std::uint64_t seed);

struct SampleAgreement {
  double chi2_z = 0.0;          // normal score of the chi-square tail probability
  double max_abs_z = 0.0;       // largest per-outcome standardised deviation
  bool impossible_seen = false;  // a zero-probability outcome was drawn
};

/// Compares observed counts over [0, probs.size()) with expected probabilities.
SampleAgreement sample_agreement(const std::vector<double>& probs, const std::vector<std::uint64_t>& counts);

}  // namespace switching
