#pragma once

// Sampling interfaces seen by the learners, plus a generic tabular
// environment built from an explicit model.
//
// Learners only ever receive Environment and Agent references, which expose
// draws and nothing else. Densities live in SwitchingModel and are handed to
// evaluation code separately.

#include <memory>
#include <string>
#include <vector>

#include "switching/model.hpp"
#include "switching/rng.hpp"
#include "switching/types.hpp"

namespace switching {

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::size_t num_states() const = 0;
  virtual std::size_t num_actions() const = 0;

  /// Draws s_1 for a new episode.
  virtual StateId reset(Rng& rng) const = 0;
  /// Draws s_{t+1} ~ p(. | s, a).
  virtual StateId step(StateId s, ActionId a, Rng& rng) const = 0;

  /// Coarse label of a state for reporting (the lane environment uses the
  /// traffic level). Defaults to a single category.
  virtual int category(StateId) const { return 0; }
  virtual std::string category_name(int category) const { return category == 0 ? "all" : "na"; }
};

class Agent {
 public:
  virtual ~Agent() = default;
  /// Draws a ~ p_d(. | s).
  virtual ActionId act(StateId s, Rng& rng) const = 0;
  virtual std::string name() const = 0;
};

using AgentPtr = std::shared_ptr<const Agent>;

/// Environment that samples directly from tabulated transition rows.
class TabularEnvironment final : public Environment {
 public:
  TabularEnvironment(Dims dims, std::vector<TabularDist> env, TabularDist initial);

  std::size_t num_states() const override { return dims_.states; }
  std::size_t num_actions() const override { return dims_.actions; }
  StateId reset(Rng& rng) const override;
  StateId step(StateId s, ActionId a, Rng& rng) const override;

 private:
  Dims dims_;
  std::vector<TabularDist> env_;
  TabularDist initial_;
};

/// Agent that samples from a tabulated policy p(. | s).
class TabularAgent final : public Agent {
 public:
  TabularAgent(std::string name, std::vector<TabularDist> policy);

  ActionId act(StateId s, Rng& rng) const override;
  std::string name() const override { return name_; }

 private:
  std::string name_;
  std::vector<TabularDist> policy_;
};

/// Draws an index from a sparse distribution with one uniform variate.
std::uint32_t sample(const TabularDist& dist, Rng& rng);

/// A complete synthetic problem: model, costs, start distribution, horizon.
struct TabularInstance {
  SwitchingModel model;
  CostParams costs;
  InitialCondition init;
  std::size_t horizon = 0;

  std::shared_ptr<Environment> environment() const;
  std::vector<AgentPtr> agents() const;
};

/// Random instance: Dirichlet(1)-like rows from normalised uniforms,
/// env cost uniform in [0, 1], control and switch costs uniform in [0, 0.5]
/// (machine control free), uniform start over states with d_0 = machine.
TabularInstance random_instance(Dims dims, std::size_t horizon, Rng& rng);

/// Fixed two-state, two-agent, two-action problem used as the small
/// learning benchmark. The machine is good in state 0 and poor in state 1,
/// the human the other way round, so the optimal switching policy uses both.
TabularInstance tiny_instance();

}  // namespace switching
