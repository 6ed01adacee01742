#pragma once

// Online switching learners and the episode loop that drives them.
//
// A learner plans one switching policy per episode and then observes the
// resulting log. Learners never see densities: the loop hands them only what
// the sampling interfaces produced.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switching/confidence.hpp"
#include "switching/environment.hpp"
#include "switching/planner.hpp"
#include "switching/rng.hpp"
#include "switching/types.hpp"

namespace switching {

struct StepRecord {
  std::size_t t = 0;  // 1-based
  StateId s = 0;
  AgentId d = 0;
  ActionId a = 0;
  StateId s_next = 0;
  double c_env = 0.0;
  double c_ctrl = 0.0;
  double c_switch = 0.0;

  double total() const { return c_env + c_ctrl + c_switch; }
  bool operator==(const StepRecord&) const = default;
};

struct EpisodeLog {
  std::uint64_t k = 0;  // 1-based
  std::size_t team = 0;
  std::uint64_t seed = 0;
  StateId s1 = 0;
  AgentId d0 = kMachine;
  std::vector<StepRecord> steps;
  std::string policy_hash;

  double realized_cost() const;
  Trajectory trajectory() const;

  nlohmann::json to_json() const;
  static EpisodeLog from_json(const nlohmann::json& j);
  bool operator==(const EpisodeLog&) const = default;
};

struct RunHistory {
  std::vector<EpisodeLog> episodes;
  SwitchingPolicy final_policy;
  std::uint64_t seed = 0;
};

/// Plays one episode of `policy` starting from a fresh reset.
EpisodeLog run_episode(const Environment& env, const std::vector<AgentPtr>& agents, const CostParams& costs,
                       const SwitchingPolicy& policy, Rng& rng, AgentId d0 = kMachine);

class Learner {
 public:
  virtual ~Learner() = default;

  virtual std::string name() const = 0;
  /// Policy for the next episode.
  virtual SwitchingPolicy plan() = 0;
  /// Folds a finished episode into the learner's statistics.
  virtual void observe(const EpisodeLog& log) = 0;
  /// Episodes observed so far.
  virtual std::uint64_t episodes() const = 0;

  virtual nlohmann::json save() const = 0;
  virtual void load(const nlohmann::json& j) = 0;
};

/// Separate confidence sets for agent policies and environment dynamics,
/// planned with the optimistic two-layer recursion. The environment counts
/// may be shared with other learners; they are then owned by the caller and
/// left out of save().
class Ucrl2McLearner final : public Learner {
 public:
  Ucrl2McLearner(Dims dims, std::size_t horizon, double delta, CostParams costs,
                 std::shared_ptr<TransitionCounts> shared_env = nullptr);

  std::string name() const override { return "ucrl2mc"; }
  SwitchingPolicy plan() override;
  void observe(const EpisodeLog& log) override;
  std::uint64_t episodes() const override { return episodes_; }

  nlohmann::json save() const override;
  void load(const nlohmann::json& j) override;

  /// Balls used by the next plan().
  ConfidenceSets confidence_sets() const;
  const AgentCounts& agent_counts() const { return agent_; }
  const TransitionCounts& env_counts() const { return *env_; }
  bool shares_env() const { return shared_; }

  /// Multiplies every radius before clamping; 1 keeps the analytic radii.
  void set_radius_scale(double scale);

 private:
  Dims dims_;
  std::size_t horizon_;
  double delta_;
  double radius_scale_ = 1.0;
  CostParams costs_;
  AgentCounts agent_;
  std::shared_ptr<TransitionCounts> env_;
  bool shared_;
  std::uint64_t episodes_ = 0;
};

/// Problem-agnostic UCRL2 on the flat MDP with states (s, d_prev) and
/// actions d. By default the immediate cost of (s, d_prev, d) is the running
/// mean of observed step costs, 0 where unvisited; known_cost switches to
/// the supplied expected cost table.
class Ucrl2Learner final : public Learner {
 public:
  Ucrl2Learner(Dims dims, std::size_t horizon, double delta, std::optional<std::vector<double>> known_cost = {});

  std::string name() const override { return "ucrl2"; }
  SwitchingPolicy plan() override;
  void observe(const EpisodeLog& log) override;
  std::uint64_t episodes() const override { return episodes_; }

  nlohmann::json save() const override;
  void load(const nlohmann::json& j) override;

  OptimisticMdp optimistic_mdp() const;
  const TransitionCounts& counts() const { return counts_; }

  void set_radius_scale(double scale);

 private:
  Dims dims_;
  std::size_t horizon_;
  double delta_;
  double radius_scale_ = 1.0;
  std::optional<std::vector<double>> known_cost_;
  TransitionCounts counts_;        // (s * D + d_prev, d) -> s' * D + d
  std::vector<double> cost_sum_;   // middle_index((s, d_prev), d)
  std::uint64_t episodes_ = 0;
};

/// Expected immediate cost c_c(d) + c_x(d, d_prev) + E_{a ~ p_d(.|s)} c'(s, a)
/// per flat (s * D + d_prev, d) cell, for the baseline's known-cost mode.
std::vector<double> augmented_expected_cost(const SwitchingModel& model, const CostParams& costs);

/// Deploys the same policy every episode (fixed agents, the optimal policy).
class FixedPolicyLearner final : public Learner {
 public:
  FixedPolicyLearner(std::string name, SwitchingPolicy policy) : name_(std::move(name)), policy_(std::move(policy)) {}

  std::string name() const override { return name_; }
  SwitchingPolicy plan() override { return policy_; }
  void observe(const EpisodeLog&) override { ++episodes_; }
  std::uint64_t episodes() const override { return episodes_; }

  nlohmann::json save() const override { return {{"episodes", episodes_}}; }
  void load(const nlohmann::json& j) override { episodes_ = j.at("episodes").get<std::uint64_t>(); }

 private:
  std::string name_;
  SwitchingPolicy policy_;
  std::uint64_t episodes_ = 0;
};

std::unique_ptr<Learner> make_fixed_agent(AgentId d, std::size_t horizon, std::size_t states, std::size_t agents);

/// One team: what it faces, who it switches between, and how it learns.
struct Team {
  std::shared_ptr<const Environment> env;
  std::vector<AgentPtr> agents;
  CostParams costs;
  std::unique_ptr<Learner> learner;
  Rng rng;
  AgentId d0 = kMachine;
};

/// Called after every episode with the team index, its log and the policy
/// that produced it.
using EpisodeObserver = std::function<void(std::size_t team, const EpisodeLog&, const SwitchingPolicy&)>;

/// Runs teams in rounds: in round k every team plays one episode, in team
/// order, and its learner observes the log before the next team plans. This
/// makes a shared environment count table deterministic.
class Coordinator {
 public:
  explicit Coordinator(std::vector<Team> teams, std::shared_ptr<TransitionCounts> shared_env = nullptr);

  std::uint64_t rounds() const { return rounds_; }
  std::size_t size() const { return teams_.size(); }
  const Team& team(std::size_t i) const { return teams_.at(i); }

  void run_round(const EpisodeObserver& observer = {});
  void run(std::uint64_t rounds, const EpisodeObserver& observer = {});

  /// Learner states, RNG states, shared counts and the round counter.
  nlohmann::json checkpoint() const;
  void restore(const nlohmann::json& j);

 private:
  std::vector<Team> teams_;
  std::shared_ptr<TransitionCounts> shared_env_;
  std::uint64_t rounds_ = 0;
};

/// Single-learner convenience wrapper returning the whole history.
RunHistory run_learner(const Environment& env, const std::vector<AgentPtr>& agents, const CostParams& costs,
                       Learner& learner, std::uint64_t episodes, Rng& rng, const EpisodeObserver& observer = {});

RunHistory run_ucrl2mc(const Environment& env, const std::vector<AgentPtr>& agents, std::uint64_t episodes,
                       std::size_t horizon, double delta, const CostParams& costs, Rng& rng,
                       const EpisodeObserver& observer = {});
RunHistory run_ucrl2_baseline(const Environment& env, const std::vector<AgentPtr>& agents, std::uint64_t episodes,
                              std::size_t horizon, double delta, const CostParams& costs, Rng& rng,
                              const EpisodeObserver& observer = {});
RunHistory run_fixed_agent(const Environment& env, const std::vector<AgentPtr>& agents, AgentId d,
                           std::uint64_t episodes, std::size_t horizon, const CostParams& costs, Rng& rng,
                           const EpisodeObserver& observer = {});

struct TeamSpec {
  std::shared_ptr<const Environment> env;
  std::vector<AgentPtr> agents;
  CostParams costs;
};

/// N interleaved UCRL2-MC learners. With share_env the environment counts
/// are one table fed by every team; team i plays on rng.split(i).
std::vector<RunHistory> run_multi_team(const std::vector<TeamSpec>& teams, std::uint64_t episodes,
                                       std::size_t horizon, double delta, Rng& rng, bool share_env,
                                       const EpisodeObserver& observer = {});

}  // namespace switching
