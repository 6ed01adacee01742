#pragma once

// Finite-horizon dynamic programming over the two-layer switching MDP.
//
// Time is 0-based internally: step t in [0, L) corresponds to t + 1 in the
// usual 1-based notation, and value row L is the all-zero terminal row.
//
// The kernels parallelise over states at a fixed time step with OpenMP.
// Straight serial versions live in switching::reference and are kept for
// cross-checking.

#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "switching/confidence.hpp"
#include "switching/model.hpp"
#include "switching/types.hpp"

namespace switching {

/// d_t = pi_t(s_t, d_{t-1}) for t in [0, L).
class SwitchingPolicy {
 public:
  SwitchingPolicy() = default;
  SwitchingPolicy(std::size_t horizon, std::size_t states, std::size_t agents, AgentId fill = kMachine);

  /// The policy that always hands control to `d`.
  static SwitchingPolicy constant(std::size_t horizon, std::size_t states, std::size_t agents, AgentId d);

  AgentId operator()(std::size_t t, StateId s, AgentId d_prev) const { return choice_[index(t, s, d_prev)]; }
  void set(std::size_t t, StateId s, AgentId d_prev, AgentId d) { choice_[index(t, s, d_prev)] = d; }

  std::size_t horizon() const { return horizon_; }
  std::size_t states() const { return states_; }
  std::size_t agents() const { return agents_; }
  const std::vector<AgentId>& table() const { return choice_; }
  std::vector<AgentId>& table() { return choice_; }

  /// FNV-1a over the table, rendered as 16 hex digits.
  std::string hash() const;

  nlohmann::json to_json() const;
  static SwitchingPolicy from_json(const nlohmann::json& j);

  bool operator==(const SwitchingPolicy&) const = default;

 private:
  std::size_t index(std::size_t t, StateId s, AgentId d_prev) const {
    return (t * states_ + s) * agents_ + d_prev;
  }

  std::size_t horizon_ = 0;
  std::size_t states_ = 0;
  std::size_t agents_ = 0;
  std::vector<AgentId> choice_;
};

/// v_t(s, d) for t in [0, L]; row L is zero.
class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(std::size_t horizon, std::size_t states, std::size_t agents);

  double operator()(std::size_t t, StateId s, AgentId d) const { return v_[index(t, s, d)]; }
  double& at(std::size_t t, StateId s, AgentId d) { return v_[index(t, s, d)]; }

  std::size_t horizon() const { return horizon_; }
  std::size_t states() const { return states_; }
  std::size_t agents() const { return agents_; }
  const std::vector<double>& table() const { return v_; }

  /// v_t(., d) as a contiguous vector over states.
  std::vector<double> column(std::size_t t, AgentId d) const;

  /// E_{s_1 ~ init}[v_0(s_1, d_0)].
  double expected_start(const InitialCondition& init) const;

  nlohmann::json to_json() const;
  static ValueTable from_json(const nlohmann::json& j);

 private:
  std::size_t index(std::size_t t, StateId s, AgentId d) const { return (t * states_ + s) * agents_ + d; }

  std::size_t horizon_ = 0;
  std::size_t states_ = 0;
  std::size_t agents_ = 0;
  std::vector<double> v_;
};

struct PlanResult {
  SwitchingPolicy policy;
  ValueTable values;
};

/// Confidence balls for one planning round: one per (s, d) over actions and
/// one per (s, a) over successor states.
struct ConfidenceSets {
  Dims dims;
  std::vector<L1Ball> agent;  // augmented_index(s, d)
  std::vector<L1Ball> env;    // middle_index(s, a)

  const L1Ball& agent_ball(StateId s, AgentId d) const { return agent[augmented_index(s, d, dims.agents)]; }
  const L1Ball& env_ball(StateId s, ActionId a) const { return env[middle_index(s, a, dims.actions)]; }
};

/// Optimistic backward recursion: for each (t, s, d_prev) minimise over the
/// next controller d of c_d(s, d_prev) plus the optimistic agent mixture of
/// c'(s, a) + optimistic E[v_{t+1}(s', d)]. Ties go to the lowest agent id.
PlanResult optimistic_backward_dp(const ConfidenceSets& sets, const CostParams& costs, std::size_t horizon);

/// Optimal switching policy and its values under a known model.
PlanResult exact_backward_dp(const SwitchingModel& model, const CostParams& costs, std::size_t horizon);

/// Expected cost-to-go of a fixed switching policy under a known model.
ValueTable evaluate_policy(const SwitchingPolicy& policy, const SwitchingModel& model, const CostParams& costs);

/// Generic finite-horizon MDP with L1 confidence balls on every transition
/// row, as consumed by extended value iteration.
struct OptimisticMdp {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<L1Ball> transition;  // middle_index(s, a), universe = states
  std::vector<double> cost;        // middle_index(s, a)
};

struct AugmentedPlan {
  std::size_t horizon = 0;
  std::size_t states = 0;
  std::vector<ActionId> choice;  // t * states + s
  std::vector<double> values;    // t * states + s, t in [0, L]

  ActionId operator()(std::size_t t, StateId s) const { return choice[t * states + s]; }
  double value(std::size_t t, StateId s) const { return values[t * states + s]; }
};

/// Backward induction where each transition row is replaced by its most
/// favourable member of the L1 ball. Ties go to the lowest action.
AugmentedPlan extended_value_iteration(const OptimisticMdp& mdp, std::size_t horizon);

namespace reference {

// Direct transcriptions of the recursions: one inner solve per
// (t, s, d_prev, d, a) cell, no reuse across cells, no threading.
PlanResult optimistic_backward_dp(const ConfidenceSets& sets, const CostParams& costs, std::size_t horizon);
PlanResult exact_backward_dp(const SwitchingModel& model, const CostParams& costs, std::size_t horizon);
ValueTable evaluate_policy(const SwitchingPolicy& policy, const SwitchingModel& model, const CostParams& costs);

}  // namespace reference

}  // namespace switching
