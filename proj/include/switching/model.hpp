#pragma once

#include <vector>

#include "switching/types.hpp"

namespace switching {

/// Fully specified two-layer model: p_d(. | s) for every (s, d) and
/// p(. | s, a) for every (s, a).
struct SwitchingModel {
  Dims dims;
  std::vector<TabularDist> agent;  // augmented_index(s, d), universe = actions
  std::vector<TabularDist> env;    // middle_index(s, a), universe = states

  const TabularDist& agent_dist(StateId s, AgentId d) const { return agent[augmented_index(s, d, dims.agents)]; }
  const TabularDist& env_dist(StateId s, ActionId a) const { return env[middle_index(s, a, dims.actions)]; }

  /// Throws StructuralError if any table is missing or mis-shaped.
  void validate() const;
};

/// Distribution of (s_1, d_0) at the start of every episode.
struct InitialCondition {
  TabularDist state;
  AgentId agent = kMachine;
};

}  // namespace switching
