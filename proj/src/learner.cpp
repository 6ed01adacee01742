#include "switching/learner.hpp"

#include <cmath>

namespace switching {

double EpisodeLog::realized_cost() const {
  double total = 0.0;
  for (const auto& step : steps) total += step.total();
  return total;
}

Trajectory EpisodeLog::trajectory() const {
  Trajectory traj{s1, d0, {}};
  traj.steps.reserve(steps.size());
  for (const auto& step : steps) traj.steps.push_back({step.s, step.d, step.a});
  return traj;
}

nlohmann::json EpisodeLog::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : steps) {
    rows.push_back({{"t", r.t},
                    {"s", r.s},
                    {"d", r.d},
                    {"a", r.a},
                    {"s_next", r.s_next},
                    {"c_env", r.c_env},
                    {"c_ctrl", r.c_ctrl},
                    {"c_switch", r.c_switch}});
  }
  return {{"k", k}, {"team", team}, {"seed", seed}, {"s1", s1}, {"d0", d0}, {"steps", rows}, {"policy_hash", policy_hash}};
}

EpisodeLog EpisodeLog::from_json(const nlohmann::json& j) {
  EpisodeLog log;
  log.k = j.at("k").get<std::uint64_t>();
  log.team = j.at("team").get<std::size_t>();
  log.seed = j.at("seed").get<std::uint64_t>();
  log.s1 = j.at("s1").get<StateId>();
  log.d0 = j.at("d0").get<AgentId>();
  log.policy_hash = j.at("policy_hash").get<std::string>();
  for (const auto& r : j.at("steps")) {
    log.steps.push_back({r.at("t").get<std::size_t>(), r.at("s").get<StateId>(), r.at("d").get<AgentId>(),
                         r.at("a").get<ActionId>(), r.at("s_next").get<StateId>(), r.at("c_env").get<double>(),
                         r.at("c_ctrl").get<double>(), r.at("c_switch").get<double>()});
  }
  return log;
}

EpisodeLog run_episode(const Environment& env, const std::vector<AgentPtr>& agents, const CostParams& costs,
                       const SwitchingPolicy& policy, Rng& rng, AgentId d0) {
  if (agents.size() != policy.agents() || env.num_states() != policy.states()) {
    throw StructuralError("policy does not match the team or environment");
  }
  EpisodeLog log;
  log.seed = rng.seed();
  log.d0 = d0;
  log.policy_hash = policy.hash();
  StateId s = env.reset(rng);
  log.s1 = s;
  AgentId d_prev = d0;
  log.steps.reserve(policy.horizon());
  for (std::size_t t = 0; t < policy.horizon(); ++t) {
    const AgentId d = policy(t, s, d_prev);
    const ActionId a = agents[d]->act(s, rng);
    const StateId next = env.step(s, a, rng);
    log.steps.push_back({t + 1, s, d, a, next, costs.env(s, a), costs.control(d), costs.switching(d, d_prev)});
    d_prev = d;
    s = next;
  }
  return log;
}

namespace {

L1Ball make_ball(TabularDist center, double radius) {
  if (radius >= kSimplexDiameter) return L1Ball::simplex(center.universe());
  return {std::move(center), radius};
}

}  // namespace

Ucrl2McLearner::Ucrl2McLearner(Dims dims, std::size_t horizon, double delta, CostParams costs,
                               std::shared_ptr<TransitionCounts> shared_env)
    : dims_(dims),
      horizon_(horizon),
      delta_(delta),
      costs_(std::move(costs)),
      agent_(dims),
      env_(shared_env ? shared_env : std::make_shared<TransitionCounts>(dims.states, dims.actions, dims.states)),
      shared_(shared_env != nullptr) {
  if (horizon_ == 0) throw ParameterError("horizon must be positive");
  if (!(delta_ > 0.0 && delta_ < 1.0)) throw ParameterError("delta must lie in (0, 1)");
  if (!(costs_.dims() == dims_)) throw StructuralError("cost tables do not match learner dimensions");
  if (env_->states() != dims_.states || env_->actions() != dims_.actions || env_->successors() != dims_.states) {
    throw StructuralError("shared environment counts have the wrong shape");
  }
}

ConfidenceSets Ucrl2McLearner::confidence_sets() const {
  const std::uint64_t k = episodes_ + 1;
  ConfidenceSets sets{dims_, {}, {}};
  sets.agent.reserve(dims_.states * dims_.agents);
  for (StateId s = 0; s < dims_.states; ++s) {
    for (AgentId d = 0; d < dims_.agents; ++d) {
      const double r = radius_scale_ * beta_agent(agent_.visits(s, d), delta_, k, horizon_, dims_);
      sets.agent.push_back(r >= kSimplexDiameter ? L1Ball::simplex(dims_.actions) : make_ball(agent_.empirical(s, d), r));
    }
  }
  sets.env.reserve(dims_.states * dims_.actions);
  for (StateId s = 0; s < dims_.states; ++s) {
    for (ActionId a = 0; a < dims_.actions; ++a) {
      const double r = radius_scale_ * beta_env(env_->visits(s, a), delta_, k, horizon_, dims_.states, dims_.actions);
      sets.env.push_back(r >= kSimplexDiameter ? L1Ball::simplex(dims_.states) : make_ball(env_->empirical(s, a), r));
    }
  }
  return sets;
}

namespace {

double checked_scale(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw ParameterError("radius scale must be positive");
  return scale;
}

}  // namespace

void Ucrl2McLearner::set_radius_scale(double scale) { radius_scale_ = checked_scale(scale); }

SwitchingPolicy Ucrl2McLearner::plan() { return optimistic_backward_dp(confidence_sets(), costs_, horizon_).policy; }

void Ucrl2McLearner::observe(const EpisodeLog& log) {
  for (const auto& step : log.steps) {
    agent_.record(step.s, step.d, step.a);
    env_->record(step.s, step.a, step.s_next);
  }
  ++episodes_;
}

nlohmann::json Ucrl2McLearner::save() const {
  nlohmann::json j = {{"episodes", episodes_}, {"agent", agent_.to_json()}};
  if (!shared_) j["env"] = env_->to_json();
  return j;
}

void Ucrl2McLearner::load(const nlohmann::json& j) {
  auto agent = AgentCounts::from_json(j.at("agent"));
  if (!(agent.dims() == dims_)) throw StructuralError("checkpoint agent counts have the wrong shape");
  if (!shared_) {
    auto env = TransitionCounts::from_json(j.at("env"));
    if (env.states() != dims_.states || env.actions() != dims_.actions || env.successors() != dims_.states) {
      throw StructuralError("checkpoint environment counts have the wrong shape");
    }
    *env_ = std::move(env);
  }
  agent_ = std::move(agent);
  episodes_ = j.at("episodes").get<std::uint64_t>();
}

Ucrl2Learner::Ucrl2Learner(Dims dims, std::size_t horizon, double delta, std::optional<std::vector<double>> known_cost)
    : dims_(dims),
      horizon_(horizon),
      delta_(delta),
      known_cost_(std::move(known_cost)),
      counts_(dims.states * dims.agents, dims.agents, dims.states * dims.agents),
      cost_sum_(dims.states * dims.agents * dims.agents, 0.0) {
  if (horizon_ == 0) throw ParameterError("horizon must be positive");
  if (!(delta_ > 0.0 && delta_ < 1.0)) throw ParameterError("delta must lie in (0, 1)");
  if (known_cost_ && known_cost_->size() != cost_sum_.size()) throw StructuralError("known cost table has wrong size");
}

OptimisticMdp Ucrl2Learner::optimistic_mdp() const {
  const std::uint64_t k = episodes_ + 1;
  const std::size_t flat_states = dims_.states * dims_.agents;
  OptimisticMdp mdp{flat_states, dims_.agents, {}, std::vector<double>(cost_sum_.size(), 0.0)};
  mdp.transition.reserve(cost_sum_.size());
  for (StateId x = 0; x < flat_states; ++x) {
    for (AgentId d = 0; d < dims_.agents; ++d) {
      const auto n = counts_.visits(x, d);
      const double r = radius_scale_ * beta_ucrl2(n, delta_, k, horizon_, flat_states, dims_.agents);
      mdp.transition.push_back(r >= kSimplexDiameter ? L1Ball::simplex(flat_states) : make_ball(counts_.empirical(x, d), r));
      const auto cell = middle_index(x, d, dims_.agents);
      if (known_cost_) {
        mdp.cost[cell] = (*known_cost_)[cell];
      } else if (n > 0) {
        mdp.cost[cell] = cost_sum_[cell] / static_cast<double>(n);
      }
    }
  }
  return mdp;
}

void Ucrl2Learner::set_radius_scale(double scale) { radius_scale_ = checked_scale(scale); }

SwitchingPolicy Ucrl2Learner::plan() {
  const AugmentedPlan flat = extended_value_iteration(optimistic_mdp(), horizon_);
  SwitchingPolicy policy(horizon_, dims_.states, dims_.agents);
  for (std::size_t t = 0; t < horizon_; ++t) {
    for (StateId s = 0; s < dims_.states; ++s) {
      for (AgentId d_prev = 0; d_prev < dims_.agents; ++d_prev) {
        policy.set(t, s, d_prev, flat(t, static_cast<StateId>(augmented_index(s, d_prev, dims_.agents))));
      }
    }
  }
  return policy;
}

void Ucrl2Learner::observe(const EpisodeLog& log) {
  AgentId d_prev = log.d0;
  for (const auto& step : log.steps) {
    const auto x = static_cast<StateId>(augmented_index(step.s, d_prev, dims_.agents));
    const auto next = static_cast<StateId>(augmented_index(step.s_next, step.d, dims_.agents));
    counts_.record(x, step.d, next);
    cost_sum_[middle_index(x, step.d, dims_.agents)] += step.total();
    d_prev = step.d;
  }
  ++episodes_;
}

nlohmann::json Ucrl2Learner::save() const {
  return {{"episodes", episodes_}, {"counts", counts_.to_json()}, {"cost_sum", cost_sum_}};
}

void Ucrl2Learner::load(const nlohmann::json& j) {
  auto counts = TransitionCounts::from_json(j.at("counts"));
  auto sums = j.at("cost_sum").get<std::vector<double>>();
  if (counts.states() != counts_.states() || counts.actions() != counts_.actions() ||
      counts.successors() != counts_.successors() || sums.size() != cost_sum_.size()) {
    throw StructuralError("checkpoint baseline counts have the wrong shape");
  }
  counts_ = std::move(counts);
  cost_sum_ = std::move(sums);
  episodes_ = j.at("episodes").get<std::uint64_t>();
}

std::vector<double> augmented_expected_cost(const SwitchingModel& model, const CostParams& costs) {
  const Dims& dims = model.dims;
  std::vector<double> out(dims.states * dims.agents * dims.agents);
  for (StateId s = 0; s < dims.states; ++s) {
    for (AgentId d_prev = 0; d_prev < dims.agents; ++d_prev) {
      for (AgentId d = 0; d < dims.agents; ++d) {
        double env = 0.0;
        for (const auto& [a, p] : model.agent_dist(s, d).support()) env += p * costs.env(s, a);
        out[middle_index(static_cast<StateId>(augmented_index(s, d_prev, dims.agents)), d, dims.agents)] =
            immediate_switch_cost(d, d_prev, costs) + env;
      }
    }
  }
  return out;
}

std::unique_ptr<Learner> make_fixed_agent(AgentId d, std::size_t horizon, std::size_t states, std::size_t agents) {
  if (d >= agents) throw StructuralError("fixed agent id out of range");
  return std::make_unique<FixedPolicyLearner>(d == kMachine ? "machine" : (d == kHuman ? "human" : "agent" + std::to_string(d)),
                                              SwitchingPolicy::constant(horizon, states, agents, d));
}

Coordinator::Coordinator(std::vector<Team> teams, std::shared_ptr<TransitionCounts> shared_env)
    : teams_(std::move(teams)), shared_env_(std::move(shared_env)) {
  if (teams_.empty()) throw ParameterError("at least one team is required");
  for (const auto& team : teams_) {
    if (!team.learner || !team.env) throw StructuralError("team is missing its learner or environment");
  }
}

void Coordinator::run_round(const EpisodeObserver& observer) {
  for (std::size_t i = 0; i < teams_.size(); ++i) {
    Team& team = teams_[i];
    const SwitchingPolicy policy = team.learner->plan();
    EpisodeLog log = run_episode(*team.env, team.agents, team.costs, policy, team.rng, team.d0);
    log.k = team.learner->episodes() + 1;
    log.team = i;
    team.learner->observe(log);
    if (observer) observer(i, log, policy);
  }
  ++rounds_;
}

void Coordinator::run(std::uint64_t rounds, const EpisodeObserver& observer) {
  for (std::uint64_t r = 0; r < rounds; ++r) run_round(observer);
}

nlohmann::json Coordinator::checkpoint() const {
  nlohmann::json teams = nlohmann::json::array();
  for (const auto& team : teams_) {
    teams.push_back({{"learner", team.learner->name()}, {"state", team.learner->save()}, {"rng", team.rng.save()}});
  }
  nlohmann::json j = {{"rounds", rounds_}, {"teams", teams}};
  if (shared_env_) j["shared_env"] = shared_env_->to_json();
  return j;
}

void Coordinator::restore(const nlohmann::json& j) {
  const auto& teams = j.at("teams");
  if (teams.size() != teams_.size()) throw StructuralError("checkpoint has a different number of teams");
  for (std::size_t i = 0; i < teams_.size(); ++i) {
    if (teams[i].at("learner").get<std::string>() != teams_[i].learner->name()) {
      throw StructuralError("checkpoint learner kind mismatch");
    }
  }
  if (shared_env_) {
    auto counts = TransitionCounts::from_json(j.at("shared_env"));
    if (counts.states() != shared_env_->states() || counts.actions() != shared_env_->actions() ||
        counts.successors() != shared_env_->successors()) {
      throw StructuralError("checkpoint shared counts have the wrong shape");
    }
    *shared_env_ = std::move(counts);
  }
  for (std::size_t i = 0; i < teams_.size(); ++i) {
    teams_[i].learner->load(teams[i].at("state"));
    teams_[i].rng.restore(teams[i].at("rng").get<std::string>());
  }
  rounds_ = j.at("rounds").get<std::uint64_t>();
}

RunHistory run_learner(const Environment& env, const std::vector<AgentPtr>& agents, const CostParams& costs,
                       Learner& learner, std::uint64_t episodes, Rng& rng, const EpisodeObserver& observer) {
  RunHistory history;
  history.seed = rng.seed();
  history.episodes.reserve(episodes);
  for (std::uint64_t k = 0; k < episodes; ++k) {
    SwitchingPolicy policy = learner.plan();
    EpisodeLog log = run_episode(env, agents, costs, policy, rng);
    log.k = learner.episodes() + 1;
    learner.observe(log);
    if (observer) observer(0, log, policy);
    history.episodes.push_back(std::move(log));
    history.final_policy = std::move(policy);
  }
  return history;
}

RunHistory run_ucrl2mc(const Environment& env, const std::vector<AgentPtr>& agents, std::uint64_t episodes,
                       std::size_t horizon, double delta, const CostParams& costs, Rng& rng,
                       const EpisodeObserver& observer) {
  Ucrl2McLearner learner(costs.dims(), horizon, delta, costs);
  return run_learner(env, agents, costs, learner, episodes, rng, observer);
}

RunHistory run_ucrl2_baseline(const Environment& env, const std::vector<AgentPtr>& agents, std::uint64_t episodes,
                              std::size_t horizon, double delta, const CostParams& costs, Rng& rng,
                              const EpisodeObserver& observer) {
  Ucrl2Learner learner(costs.dims(), horizon, delta);
  return run_learner(env, agents, costs, learner, episodes, rng, observer);
}

RunHistory run_fixed_agent(const Environment& env, const std::vector<AgentPtr>& agents, AgentId d,
                           std::uint64_t episodes, std::size_t horizon, const CostParams& costs, Rng& rng,
                           const EpisodeObserver& observer) {
  auto learner = make_fixed_agent(d, horizon, env.num_states(), agents.size());
  return run_learner(env, agents, costs, *learner, episodes, rng, observer);
}

std::vector<RunHistory> run_multi_team(const std::vector<TeamSpec>& teams, std::uint64_t episodes,
                                       std::size_t horizon, double delta, Rng& rng, bool share_env,
                                       const EpisodeObserver& observer) {
  std::shared_ptr<TransitionCounts> shared;
  if (share_env) {
    const Dims& dims = teams.at(0).costs.dims();
    shared = std::make_shared<TransitionCounts>(dims.states, dims.actions, dims.states);
  }
  std::vector<Team> runtime;
  for (std::size_t i = 0; i < teams.size(); ++i) {
    const auto& spec = teams[i];
    runtime.push_back({spec.env, spec.agents, spec.costs,
                       std::make_unique<Ucrl2McLearner>(spec.costs.dims(), horizon, delta, spec.costs, shared),
                       rng.split(i), kMachine});
  }
  std::vector<RunHistory> out(teams.size());
  for (std::size_t i = 0; i < teams.size(); ++i) out[i].seed = runtime[i].rng.seed();
  Coordinator coordinator(std::move(runtime), shared);
  coordinator.run(episodes, [&](std::size_t team, const EpisodeLog& log, const SwitchingPolicy& policy) {
    out[team].episodes.push_back(log);
    out[team].final_policy = policy;
    if (observer) observer(team, log, policy);
  });
  return out;
}

}  // namespace switching
