#include "switching/planner.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace switching {

void SwitchingModel::validate() const {
  if (agent.size() != dims.states * dims.agents) throw StructuralError("agent table has wrong size");
  if (env.size() != dims.states * dims.actions) throw StructuralError("env table has wrong size");
  for (const auto& p : agent) {
    if (p.universe() != dims.actions) throw StructuralError("agent distribution over wrong universe");
  }
  for (const auto& p : env) {
    if (p.universe() != dims.states) throw StructuralError("env distribution over wrong universe");
  }
}

SwitchingPolicy::SwitchingPolicy(std::size_t horizon, std::size_t states, std::size_t agents, AgentId fill)
    : horizon_(horizon), states_(states), agents_(agents), choice_(horizon * states * agents, fill) {}

SwitchingPolicy SwitchingPolicy::constant(std::size_t horizon, std::size_t states, std::size_t agents, AgentId d) {
  if (d >= agents) throw StructuralError("agent id out of range");
  return SwitchingPolicy(horizon, states, agents, d);
}

std::string SwitchingPolicy::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t x) {
    for (int i = 0; i < 4; ++i) {
      h ^= (x >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(horizon_);
  mix(states_);
  mix(agents_);
  for (AgentId d : choice_) mix(d);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json SwitchingPolicy::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < horizon_; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (StateId s = 0; s < states_; ++s) {
      nlohmann::json cell = nlohmann::json::array();
      for (AgentId d = 0; d < agents_; ++d) cell.push_back((*this)(t, s, d));
      row.push_back(std::move(cell));
    }
    rows.push_back(std::move(row));
  }
  return {{"horizon", horizon_}, {"states", states_}, {"agents", agents_}, {"choice", rows}};
}

SwitchingPolicy SwitchingPolicy::from_json(const nlohmann::json& j) {
  SwitchingPolicy p(j.at("horizon").get<std::size_t>(), j.at("states").get<std::size_t>(),
                    j.at("agents").get<std::size_t>());
  const auto& rows = j.at("choice");
  if (rows.size() != p.horizon_) throw StructuralError("policy JSON has wrong horizon");
  for (std::size_t t = 0; t < p.horizon_; ++t) {
    if (rows[t].size() != p.states_) throw StructuralError("policy JSON has wrong state count");
    for (StateId s = 0; s < p.states_; ++s) {
      if (rows[t][s].size() != p.agents_) throw StructuralError("policy JSON has wrong agent count");
      for (AgentId d = 0; d < p.agents_; ++d) {
        const auto v = rows[t][s][d].get<AgentId>();
        if (v >= p.agents_) throw StructuralError("policy JSON agent out of range");
        p.set(t, s, d, v);
      }
    }
  }
  return p;
}

ValueTable::ValueTable(std::size_t horizon, std::size_t states, std::size_t agents)
    : horizon_(horizon), states_(states), agents_(agents), v_((horizon + 1) * states * agents, 0.0) {}

std::vector<double> ValueTable::column(std::size_t t, AgentId d) const {
  std::vector<double> out(states_);
  for (StateId s = 0; s < states_; ++s) out[s] = (*this)(t, s, d);
  return out;
}

double ValueTable::expected_start(const InitialCondition& init) const {
  if (init.state.universe() != states_ || init.agent >= agents_) throw StructuralError("initial condition mismatch");
  double acc = 0.0;
  for (const auto& [s, p] : init.state.support()) acc += p * (*this)(0, s, init.agent);
  return acc;
}

nlohmann::json ValueTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t <= horizon_; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (StateId s = 0; s < states_; ++s) {
      nlohmann::json cell = nlohmann::json::array();
      for (AgentId d = 0; d < agents_; ++d) cell.push_back((*this)(t, s, d));
      row.push_back(std::move(cell));
    }
    rows.push_back(std::move(row));
  }
  return {{"horizon", horizon_}, {"states", states_}, {"agents", agents_}, {"values", rows}};
}

ValueTable ValueTable::from_json(const nlohmann::json& j) {
  ValueTable v(j.at("horizon").get<std::size_t>(), j.at("states").get<std::size_t>(),
               j.at("agents").get<std::size_t>());
  const auto& rows = j.at("values");
  if (rows.size() != v.horizon_ + 1) throw StructuralError("value JSON has wrong horizon");
  for (std::size_t t = 0; t <= v.horizon_; ++t) {
    for (StateId s = 0; s < v.states_; ++s) {
      for (AgentId d = 0; d < v.agents_; ++d) v.at(t, s, d) = rows.at(t).at(s).at(d).get<double>();
    }
  }
  return v;
}

namespace {

void check_costs(const Dims& dims, const CostParams& costs) {
  if (!(costs.dims() == dims)) throw StructuralError("cost tables do not match model dimensions");
}

void check_sets(const ConfidenceSets& sets) {
  const Dims& d = sets.dims;
  if (sets.agent.size() != d.states * d.agents) throw StructuralError("missing agent confidence ball");
  if (sets.env.size() != d.states * d.actions) throw StructuralError("missing env confidence ball");
  for (const auto& b : sets.agent) {
    if (b.center.universe() != d.actions) throw StructuralError("agent ball over wrong universe");
  }
  for (const auto& b : sets.env) {
    if (b.center.universe() != d.states) throw StructuralError("env ball over wrong universe");
  }
}

// v_t(s, d_prev) = min_d [c_c(d) + c_x(d, d_prev) + inner(s, d)], lowest d on ties.
void switch_backup(std::size_t t, const std::vector<double>& inner, const CostParams& costs, PlanResult& out) {
  const Dims& dims = costs.dims();
  const auto n_states = static_cast<std::int64_t>(dims.states);
#pragma omp parallel for schedule(static)
  for (std::int64_t si = 0; si < n_states; ++si) {
    const auto s = static_cast<StateId>(si);
    for (AgentId d_prev = 0; d_prev < dims.agents; ++d_prev) {
      double best = std::numeric_limits<double>::infinity();
      AgentId arg = 0;
      for (AgentId d = 0; d < dims.agents; ++d) {
        const double v = costs.control(d) + costs.switching(d, d_prev) + inner[augmented_index(s, d, dims.agents)];
        if (v < best) {
          best = v;
          arg = d;
        }
      }
      out.values.at(t, s, d_prev) = best;
      out.policy.set(t, s, d_prev, arg);
    }
  }
}

}  // namespace

PlanResult optimistic_backward_dp(const ConfidenceSets& sets, const CostParams& costs, std::size_t horizon) {
  check_sets(sets);
  check_costs(sets.dims, costs);
  const Dims& dims = sets.dims;
  PlanResult out{SwitchingPolicy(horizon, dims.states, dims.agents), ValueTable(horizon, dims.states, dims.agents)};
  std::vector<double> inner(dims.states * dims.agents);
  const auto n_states = static_cast<std::int64_t>(dims.states);

  for (std::size_t t = horizon; t-- > 0;) {
    for (AgentId d = 0; d < dims.agents; ++d) {
      // The successor weights depend only on (t, d); order them once.
      const std::vector<double> next = out.values.column(t + 1, d);
      const WeightOrder order(next);
#pragma omp parallel
      {
        std::vector<TabularDist::Entry> scratch;
        std::vector<double> q(dims.actions);
#pragma omp for schedule(dynamic, 64)
        for (std::int64_t si = 0; si < n_states; ++si) {
          const auto s = static_cast<StateId>(si);
          for (ActionId a = 0; a < dims.actions; ++a) {
            q[a] = costs.env(s, a) + l1_optimistic_value(next, order, sets.env_ball(s, a), scratch);
          }
          const WeightOrder q_order(q);
          inner[augmented_index(s, d, dims.agents)] = l1_optimistic_value(q, q_order, sets.agent_ball(s, d), scratch);
        }
      }
    }
    switch_backup(t, inner, costs, out);
  }
  return out;
}

PlanResult exact_backward_dp(const SwitchingModel& model, const CostParams& costs, std::size_t horizon) {
  model.validate();
  check_costs(model.dims, costs);
  const Dims& dims = model.dims;
  PlanResult out{SwitchingPolicy(horizon, dims.states, dims.agents), ValueTable(horizon, dims.states, dims.agents)};
  std::vector<double> inner(dims.states * dims.agents);
  const auto n_states = static_cast<std::int64_t>(dims.states);

  for (std::size_t t = horizon; t-- > 0;) {
    for (AgentId d = 0; d < dims.agents; ++d) {
      const std::vector<double> next = out.values.column(t + 1, d);
#pragma omp parallel for schedule(dynamic, 64)
      for (std::int64_t si = 0; si < n_states; ++si) {
        const auto s = static_cast<StateId>(si);
        double acc = 0.0;
        for (const auto& [a, p] : model.agent_dist(s, d).support()) {
          if (p == 0.0) continue;
          acc += p * (costs.env(s, a) + model.env_dist(s, a).expectation(next));
        }
        inner[augmented_index(s, d, dims.agents)] = acc;
      }
    }
    switch_backup(t, inner, costs, out);
  }
  return out;
}

ValueTable evaluate_policy(const SwitchingPolicy& policy, const SwitchingModel& model, const CostParams& costs) {
  model.validate();
  check_costs(model.dims, costs);
  const Dims& dims = model.dims;
  if (policy.states() != dims.states || policy.agents() != dims.agents) {
    throw StructuralError("policy does not match model dimensions");
  }
  const std::size_t horizon = policy.horizon();
  ValueTable values(horizon, dims.states, dims.agents);
  std::vector<double> inner(dims.states * dims.agents);
  const auto n_states = static_cast<std::int64_t>(dims.states);

  for (std::size_t t = horizon; t-- > 0;) {
    for (AgentId d = 0; d < dims.agents; ++d) {
      const std::vector<double> next = values.column(t + 1, d);
#pragma omp parallel for schedule(dynamic, 64)
      for (std::int64_t si = 0; si < n_states; ++si) {
        const auto s = static_cast<StateId>(si);
        bool needed = false;
        for (AgentId d_prev = 0; d_prev < dims.agents && !needed; ++d_prev) needed = policy(t, s, d_prev) == d;
        if (!needed) continue;
        double acc = 0.0;
        for (const auto& [a, p] : model.agent_dist(s, d).support()) {
          if (p == 0.0) continue;
          acc += p * (costs.env(s, a) + model.env_dist(s, a).expectation(next));
        }
        inner[augmented_index(s, d, dims.agents)] = acc;
      }
    }
#pragma omp parallel for schedule(static)
    for (std::int64_t si = 0; si < n_states; ++si) {
      const auto s = static_cast<StateId>(si);
      for (AgentId d_prev = 0; d_prev < dims.agents; ++d_prev) {
        const AgentId d = policy(t, s, d_prev);
        values.at(t, s, d_prev) =
            costs.control(d) + costs.switching(d, d_prev) + inner[augmented_index(s, d, dims.agents)];
      }
    }
  }
  return values;
}

AugmentedPlan extended_value_iteration(const OptimisticMdp& mdp, std::size_t horizon) {
  const std::size_t rows = mdp.states * mdp.actions;
  if (mdp.transition.size() != rows || mdp.cost.size() != rows) throw StructuralError("optimistic MDP is mis-shaped");
  for (const auto& b : mdp.transition) {
    if (b.center.universe() != mdp.states) throw StructuralError("transition ball over wrong universe");
  }
  AugmentedPlan plan{horizon, mdp.states, std::vector<ActionId>(horizon * mdp.states, 0),
                     std::vector<double>((horizon + 1) * mdp.states, 0.0)};
  const auto n_states = static_cast<std::int64_t>(mdp.states);
  for (std::size_t t = horizon; t-- > 0;) {
    const std::span<const double> next(plan.values.data() + (t + 1) * mdp.states, mdp.states);
    const WeightOrder order(next);
#pragma omp parallel
    {
      std::vector<TabularDist::Entry> scratch;
#pragma omp for schedule(dynamic, 64)
      for (std::int64_t si = 0; si < n_states; ++si) {
        const auto s = static_cast<StateId>(si);
        double best = std::numeric_limits<double>::infinity();
        ActionId arg = 0;
        for (ActionId a = 0; a < mdp.actions; ++a) {
          const auto row = middle_index(s, a, mdp.actions);
          const double q = mdp.cost[row] + l1_optimistic_value(next, order, mdp.transition[row], scratch);
          if (q < best) {
            best = q;
            arg = a;
          }
        }
        plan.values[t * mdp.states + s] = best;
        plan.choice[t * mdp.states + s] = arg;
      }
    }
  }
  return plan;
}

}  // namespace switching
