#pragma once

// Exact regret accounting against the optimal switching policy, and
// per-episode control statistics.

#include <cstdio>
#include <string>
#include <vector>

#include "switching/environment.hpp"
#include "switching/learner.hpp"
#include "switching/planner.hpp"

namespace switching {

/// Per-episode gaps and their running sum.
struct RegretCurve {
  std::size_t horizon = 0;
  std::vector<double> delta;
  std::vector<double> cumulative;

  void push(double d);
  std::size_t episodes() const { return delta.size(); }
  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
  /// Cumulative regret after the first k episodes (k = 0 gives 0).
  double at(std::size_t k) const { return k == 0 ? 0.0 : cumulative.at(k - 1); }
};

/// Holds pi* and its start value for one (model, costs, start) triple.
class RegretOracle {
 public:
  RegretOracle(SwitchingModel model, CostParams costs, InitialCondition init, std::size_t horizon);

  const PlanResult& optimal() const { return optimal_; }
  double optimal_value() const { return optimal_value_; }
  /// E_{s_1}[V^pi_1(s_1, d_0)].
  double expected_cost(const SwitchingPolicy& policy) const;
  /// expected_cost(policy) - optimal_value().
  double regret(const SwitchingPolicy& policy) const;

  const SwitchingModel& model() const { return model_; }
  const CostParams& costs() const { return costs_; }
  const InitialCondition& init() const { return init_; }

 private:
  SwitchingModel model_;
  CostParams costs_;
  InitialCondition init_;
  PlanResult optimal_;
  double optimal_value_ = 0.0;
};

/// E_{init}[V^pi_1 - V^{pi*}_1] computed from scratch.
double episode_regret(const SwitchingPolicy& policy, const SwitchingModel& model, const CostParams& costs,
                      const InitialCondition& init);

/// Round-wise sum of per-team curves (all curves must have equal length).
RegretCurve multi_team_regret(const std::vector<RegretCurve>& teams);

/// (R(K) - R(K/2)) / R(K/2): 1 for linear growth, below 1 for concave.
/// Throws ParameterError when K < 4.
double sublinearity_score(const RegretCurve& curve);

struct ControlStats {
  std::size_t steps = 0;
  std::size_t human_steps = 0;  // steps with d_t != machine
  std::size_t switches = 0;     // d_t != d_{t-1}, counting from d_0
  std::vector<std::size_t> steps_by_category;
  std::vector<std::size_t> human_by_category;

  double human_fraction() const {
    return steps == 0 ? 0.0 : static_cast<double>(human_steps) / static_cast<double>(steps);
  }
  void merge(const ControlStats& other);

  nlohmann::json to_json() const;
  static ControlStats from_json(const nlohmann::json& j);
  bool operator==(const ControlStats&) const = default;
};

/// Categories come from env.category(s_t) and must lie in [0, categories).
ControlStats control_stats(const EpisodeLog& log, const Environment& env, std::size_t categories);

/// CSV contract consumed by the plotting tools.
class RegretCsvWriter {
 public:
  static constexpr const char* kHeader = "team,k,t_steps,delta_k,cum_regret,human_frac,switches,gamma0";

  explicit RegretCsvWriter(std::FILE* out) : out_(out) {}
  void header() const;
  void row(std::size_t team, std::uint64_t k, std::size_t horizon, double delta_k, double cum_regret,
           const ControlStats& stats, const std::string& gamma0) const;

 private:
  std::FILE* out_;
};

}  // namespace switching
