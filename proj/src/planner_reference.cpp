#include <limits>

#include "switching/planner.hpp"

namespace switching::reference {

namespace {

template <typename Inner>
PlanResult backward(const Dims& dims, const CostParams& costs, std::size_t horizon, Inner inner) {
  if (!(costs.dims() == dims)) throw StructuralError("cost tables do not match model dimensions");
  PlanResult out{SwitchingPolicy(horizon, dims.states, dims.agents), ValueTable(horizon, dims.states, dims.agents)};
  for (std::size_t t = horizon; t-- > 0;) {
    for (StateId s = 0; s < dims.states; ++s) {
      for (AgentId d_prev = 0; d_prev < dims.agents; ++d_prev) {
        double best = std::numeric_limits<double>::infinity();
        AgentId arg = 0;
        for (AgentId d = 0; d < dims.agents; ++d) {
          const double v = immediate_switch_cost(d, d_prev, costs) + inner(out.values, t, s, d);
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
  return out;
}

double expected_inner(const SwitchingModel& model, const CostParams& costs, const ValueTable& v, std::size_t t,
                      StateId s, AgentId d) {
  double acc = 0.0;
  for (ActionId a = 0; a < model.dims.actions; ++a) {
    double next = 0.0;
    for (StateId s2 = 0; s2 < model.dims.states; ++s2) next += model.env_dist(s, a).prob(s2) * v(t + 1, s2, d);
    acc += model.agent_dist(s, d).prob(a) * (costs.env(s, a) + next);
  }
  return acc;
}

}  // namespace

PlanResult optimistic_backward_dp(const ConfidenceSets& sets, const CostParams& costs, std::size_t horizon) {
  const Dims& dims = sets.dims;
  if (sets.agent.size() != dims.states * dims.agents || sets.env.size() != dims.states * dims.actions) {
    throw StructuralError("missing confidence ball");
  }
  return backward(dims, costs, horizon, [&](const ValueTable& v, std::size_t t, StateId s, AgentId d) {
    const std::vector<double> next = v.column(t + 1, d);
    std::vector<double> q(dims.actions);
    for (ActionId a = 0; a < dims.actions; ++a) {
      q[a] = costs.env(s, a) + l1_optimistic_min(next, sets.env_ball(s, a)).value;
    }
    return l1_optimistic_min(q, sets.agent_ball(s, d)).value;
  });
}

PlanResult exact_backward_dp(const SwitchingModel& model, const CostParams& costs, std::size_t horizon) {
  model.validate();
  return backward(model.dims, costs, horizon, [&](const ValueTable& v, std::size_t t, StateId s, AgentId d) {
    return expected_inner(model, costs, v, t, s, d);
  });
}

ValueTable evaluate_policy(const SwitchingPolicy& policy, const SwitchingModel& model, const CostParams& costs) {
  model.validate();
  const Dims& dims = model.dims;
  ValueTable v(policy.horizon(), dims.states, dims.agents);
  for (std::size_t t = policy.horizon(); t-- > 0;) {
    for (StateId s = 0; s < dims.states; ++s) {
      for (AgentId d_prev = 0; d_prev < dims.agents; ++d_prev) {
        const AgentId d = policy(t, s, d_prev);
        v.at(t, s, d_prev) = immediate_switch_cost(d, d_prev, costs) + expected_inner(model, costs, v, t, s, d);
      }
    }
  }
  return v;
}

}  // namespace switching::reference
