#pragma once

// Domain types for the two-layer switching MDP: ids, cost tables,
// trajectories, sparse distributions and flat index helpers.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace switching {

/// Raised when an index or table shape does not match the declared dimensions.
class StructuralError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Raised for numeric parameters outside their admissible range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
using AgentId = std::uint32_t;

inline constexpr AgentId kMachine = 0;
inline constexpr AgentId kHuman = 1;

struct Dims {
  std::size_t states = 0;
  std::size_t agents = 0;
  std::size_t actions = 0;

  bool operator==(const Dims&) const = default;
};

/// Row-major encoding of (s, d) over S x D.
inline std::size_t augmented_index(StateId s, AgentId d, std::size_t num_agents) {
  return static_cast<std::size_t>(s) * num_agents + d;
}
inline std::pair<StateId, AgentId> augmented_decode(std::size_t idx, std::size_t num_agents) {
  return {static_cast<StateId>(idx / num_agents), static_cast<AgentId>(idx % num_agents)};
}

/// Row-major encoding of (s, a) over S x A.
inline std::size_t middle_index(StateId s, ActionId a, std::size_t num_actions) {
  return static_cast<std::size_t>(s) * num_actions + a;
}
inline std::pair<StateId, ActionId> middle_decode(std::size_t idx, std::size_t num_actions) {
  return {static_cast<StateId>(idx / num_actions), static_cast<ActionId>(idx % num_actions)};
}

/// Environment, control and switching cost tables.
///
/// env_cost is indexed by middle_index(s, a); switch_cost by d * D + d_prev.
class CostParams {
 public:
  CostParams() = default;
  CostParams(Dims dims, std::vector<double> env_cost, std::vector<double> control_cost,
             std::vector<double> switch_cost);

  /// Dense tables with a state-only environment cost, c_c(human) = control_human
  /// for every non-machine agent and c_x(d, d') = switch_cost * [d != d'].
  static CostParams from_state_costs(Dims dims, std::span<const double> state_cost,
                                     double control_human, double switch_cost);

  const Dims& dims() const { return dims_; }
  double env(StateId s, ActionId a) const { return env_cost_[middle_index(s, a, dims_.actions)]; }
  double control(AgentId d) const { return control_cost_[d]; }
  double switching(AgentId d, AgentId d_prev) const {
    return switch_cost_[static_cast<std::size_t>(d) * dims_.agents + d_prev];
  }

  std::span<const double> env_table() const { return env_cost_; }
  std::span<const double> control_table() const { return control_cost_; }
  std::span<const double> switch_table() const { return switch_cost_; }

 private:
  Dims dims_;
  std::vector<double> env_cost_;
  std::vector<double> control_cost_;
  std::vector<double> switch_cost_;
};

/// c_c(d) + c_x(d, d_prev).
double immediate_switch_cost(AgentId d, AgentId d_prev, const CostParams& costs);

struct Step {
  StateId state = 0;
  AgentId agent = 0;
  ActionId action = 0;
};

struct Trajectory {
  StateId initial_state = 0;
  AgentId initial_agent = kMachine;
  std::vector<Step> steps;

  std::size_t horizon() const { return steps.size(); }
};

/// Sum over t of c'(s_t, a_t) + c_c(d_t) + c_x(d_t, d_{t-1}).
double trajectory_cost(const Trajectory& traj, const CostParams& costs);

/// Probability vector over [0, universe) stored as (index, probability)
/// pairs sorted by index. Zero-probability entries are allowed in the support.
class TabularDist {
 public:
  using Entry = std::pair<std::uint32_t, double>;

  TabularDist() = default;
  /// Validates non-negativity, uniqueness, range and unit mass (1e-12).
  TabularDist(std::size_t universe, std::vector<Entry> support);

  static TabularDist uniform(std::size_t universe);
  static TabularDist point(std::size_t universe, std::uint32_t index);
  static TabularDist from_dense(std::span<const double> probs);

  std::size_t universe() const { return universe_; }
  const std::vector<Entry>& support() const { return support_; }
  double prob(std::uint32_t index) const;
  std::vector<double> dense() const;

  /// Sum over the support of p_i * w_i.
  double expectation(std::span<const double> weights) const;

 private:
  std::size_t universe_ = 0;
  std::vector<Entry> support_;
};

inline constexpr double kMassTolerance = 1e-12;

}  // namespace switching
