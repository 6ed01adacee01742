#pragma once

// Visit counting, empirical estimates, L1 confidence radii and the
// closed-form minimisation of a linear objective over an L1 ball
// intersected with the probability simplex.

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "switching/types.hpp"

namespace switching {

/// N'(s, a) and N'(s, a, s'). Successor counts are kept sparse per (s, a),
/// sorted by successor index.
class TransitionCounts {
 public:
  using Successor = std::pair<std::uint32_t, std::uint64_t>;

  TransitionCounts() = default;
  TransitionCounts(std::size_t states, std::size_t actions, std::size_t successors);

  void record(StateId s, ActionId a, StateId next);

  std::size_t states() const { return states_; }
  std::size_t actions() const { return actions_; }
  std::size_t successors() const { return successors_; }

  std::uint64_t visits(StateId s, ActionId a) const { return n_sa_[middle_index(s, a, actions_)]; }
  std::uint64_t visits(StateId s, ActionId a, StateId next) const;
  const std::vector<Successor>& successor_counts(StateId s, ActionId a) const {
    return n_sas_[middle_index(s, a, actions_)];
  }
  std::uint64_t total() const { return total_; }

  /// N'(s, a, .) / N'(s, a), or uniform over successors when unvisited.
  TabularDist empirical(StateId s, ActionId a) const;

  nlohmann::json to_json() const;
  static TransitionCounts from_json(const nlohmann::json& j);

  bool operator==(const TransitionCounts&) const = default;

 private:
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::size_t successors_ = 0;
  std::uint64_t total_ = 0;
  std::vector<std::uint64_t> n_sa_;
  std::vector<std::vector<Successor>> n_sas_;
};

/// N(s, d) and N(s, d, a).
class AgentCounts {
 public:
  AgentCounts() = default;
  explicit AgentCounts(Dims dims);

  void record(StateId s, AgentId d, ActionId a);

  const Dims& dims() const { return dims_; }
  std::uint64_t visits(StateId s, AgentId d) const { return n_sd_[augmented_index(s, d, dims_.agents)]; }
  std::uint64_t visits(StateId s, AgentId d, ActionId a) const {
    return n_sda_[augmented_index(s, d, dims_.agents) * dims_.actions + a];
  }
  std::uint64_t total() const { return total_; }

  /// N(s, d, .) / N(s, d), or uniform over actions when unvisited.
  TabularDist empirical(StateId s, AgentId d) const;

  nlohmann::json to_json() const;
  static AgentCounts from_json(const nlohmann::json& j);

  bool operator==(const AgentCounts&) const = default;

 private:
  Dims dims_;
  std::uint64_t total_ = 0;
  std::vector<std::uint64_t> n_sd_;
  std::vector<std::uint64_t> n_sda_;
};

/// The four visit counters of one learner plus the episode counter.
struct CountStore {
  CountStore() = default;
  CountStore(Dims dims, std::size_t horizon)
      : dims(dims), horizon(horizon), agent(dims), env(dims.states, dims.actions, dims.states) {}

  Dims dims;
  std::size_t horizon = 0;
  std::uint64_t episodes = 0;
  AgentCounts agent;
  TransitionCounts env;

  nlohmann::json to_json() const;
  static CountStore from_json(const nlohmann::json& j);

  bool operator==(const CountStore&) const = default;
};

/// Increments N(s,d), N(s,d,a), N'(s,a) and N'(s,a,s').
void record_step(CountStore& store, StateId s, AgentId d, ActionId a, StateId next);

TabularDist empirical_agent_dist(const CountStore& store, StateId s, AgentId d);
TabularDist empirical_env_dist(const CountStore& store, StateId s, ActionId a);

/// sqrt(2 log_term / max(1, n)) clamped to [0, 2].
double l1_radius(double log_term, std::uint64_t n);

/// Radius for the agent-policy ball at (s, d) before episode k (1-based).
/// log term: log((k-1)^7 L^7 |S||D| 2^(|A|+1) / delta); k = 1 gives 2.
double beta_agent(std::uint64_t n_sd, double delta, std::uint64_t k, std::size_t horizon, const Dims& dims);
double beta_agent(const CountStore& store, StateId s, AgentId d, double delta, std::uint64_t k);

/// Radius for the transition ball at (s, a) before episode k (1-based).
/// log term: log((k-1)^7 L^7 |S||A| 2^(|S|+1) / delta); k = 1 gives 2.
double beta_env(std::uint64_t n_sa, double delta, std::uint64_t k, std::size_t horizon, std::size_t num_states,
                std::size_t num_actions);
double beta_env(const CountStore& store, StateId s, ActionId a, double delta, std::uint64_t k);

/// Radius used by the flat UCRL2 baseline over S' states and A' actions:
/// sqrt(14 |S'| log(2 (k-1) L |A'| |S'| / delta) / max(1, n)), clamped to 2;
/// k = 1 gives 2.
double beta_ucrl2(std::uint64_t n, double delta, std::uint64_t k, std::size_t horizon, std::size_t num_states,
                  std::size_t num_actions);

inline constexpr double kSimplexDiameter = 2.0;

/// L1 ball of distributions around a centre. A radius of 2 covers the whole
/// simplex regardless of the centre.
struct L1Ball {
  TabularDist center;
  double radius = 0.0;

  /// The whole simplex over `universe` outcomes.
  static L1Ball simplex(std::size_t universe) { return {TabularDist::point(universe, 0), kSimplexDiameter}; }
  bool covers_simplex() const { return radius >= kSimplexDiameter; }
  bool contains(const TabularDist& p, double tol = 0.0) const;
};

double l1_distance(const TabularDist& a, const TabularDist& b);

/// Ascending (weight, index) order of a weight vector; rank[i] is the
/// position of index i. Shared across many minimisations with the same weights.
struct WeightOrder {
  explicit WeightOrder(std::span<const double> weights);

  std::vector<std::uint32_t> rank;
  std::uint32_t argmin = 0;
};

struct OptimisticSolution {
  TabularDist dist;
  double value = 0.0;
};

/// Minimises sum_i x_i w_i over the simplex subject to ||x - b||_1 <= radius.
///
/// The minimiser moves up to radius/2 extra mass onto the smallest weight
/// (ties: lowest index) and removes the excess from the largest weights
/// first. Only the argmin index and the centre's support can carry mass.
OptimisticSolution l1_optimistic_min(std::span<const double> weights, const L1Ball& ball);
OptimisticSolution l1_optimistic_min(std::span<const double> weights, const WeightOrder& order,
                                     const L1Ball& ball);

/// Value-only variant for hot loops; `scratch` is reused between calls.
double l1_optimistic_value(std::span<const double> weights, const WeightOrder& order, const L1Ball& ball,
                           std::vector<TabularDist::Entry>& scratch);

}  // namespace switching
