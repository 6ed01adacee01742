#include "switching/environment.hpp"

namespace switching {

std::uint32_t sample(const TabularDist& dist, Rng& rng) {
  const auto& sup = dist.support();
  const double u = rng.uniform();
  double acc = 0.0;
  std::uint32_t last = sup.front().first;
  for (const auto& [i, p] : sup) {
    if (p <= 0.0) continue;
    acc += p;
    last = i;
    if (u < acc) return i;
  }
  return last;
}

TabularEnvironment::TabularEnvironment(Dims dims, std::vector<TabularDist> env, TabularDist initial)
    : dims_(dims), env_(std::move(env)), initial_(std::move(initial)) {
  if (env_.size() != dims_.states * dims_.actions) throw StructuralError("env table has wrong size");
  if (initial_.universe() != dims_.states) throw StructuralError("initial distribution over wrong universe");
}

StateId TabularEnvironment::reset(Rng& rng) const { return sample(initial_, rng); }

StateId TabularEnvironment::step(StateId s, ActionId a, Rng& rng) const {
  return sample(env_[middle_index(s, a, dims_.actions)], rng);
}

TabularAgent::TabularAgent(std::string name, std::vector<TabularDist> policy)
    : name_(std::move(name)), policy_(std::move(policy)) {}

ActionId TabularAgent::act(StateId s, Rng& rng) const { return sample(policy_.at(s), rng); }

std::shared_ptr<Environment> TabularInstance::environment() const {
  return std::make_shared<TabularEnvironment>(model.dims, model.env, init.state);
}

std::vector<AgentPtr> TabularInstance::agents() const {
  std::vector<AgentPtr> out;
  for (AgentId d = 0; d < model.dims.agents; ++d) {
    std::vector<TabularDist> rows;
    for (StateId s = 0; s < model.dims.states; ++s) rows.push_back(model.agent_dist(s, d));
    out.push_back(std::make_shared<TabularAgent>(d == kMachine ? "machine" : (d == kHuman ? std::string("human") : "agent" + std::to_string(d)),
                                                 std::move(rows)));
  }
  return out;
}

namespace {

TabularDist random_row(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  double total = 0.0;
  for (double& x : w) {
    x = rng.uniform() + 1e-3;
    total += x;
  }
  for (double& x : w) x /= total;
  double check = 0.0;
  for (double x : w) check += x;
  w.back() += 1.0 - check;
  return TabularDist::from_dense(w);
}

}  // namespace

TabularInstance random_instance(Dims dims, std::size_t horizon, Rng& rng) {
  TabularInstance inst;
  inst.model.dims = dims;
  for (std::size_t i = 0; i < dims.states * dims.agents; ++i) inst.model.agent.push_back(random_row(dims.actions, rng));
  for (std::size_t i = 0; i < dims.states * dims.actions; ++i) inst.model.env.push_back(random_row(dims.states, rng));
  std::vector<double> env(dims.states * dims.actions);
  for (double& c : env) c = rng.uniform();
  std::vector<double> control(dims.agents, 0.0);
  for (std::size_t d = 1; d < dims.agents; ++d) control[d] = 0.5 * rng.uniform();
  std::vector<double> sw(dims.agents * dims.agents, 0.0);
  for (std::size_t d = 0; d < dims.agents; ++d) {
    for (std::size_t p = 0; p < dims.agents; ++p) {
      if (d != p) sw[d * dims.agents + p] = 0.5 * rng.uniform();
    }
  }
  inst.costs = CostParams(dims, std::move(env), std::move(control), std::move(sw));
  inst.init = {TabularDist::uniform(dims.states), kMachine};
  inst.horizon = horizon;
  return inst;
}

TabularInstance tiny_instance() {
  const Dims dims{2, 2, 2};
  TabularInstance inst;
  inst.model.dims = dims;
  // p_d(a | s), order (s, d): machine reliable in state 0, human in state 1.
  inst.model.agent = {
      TabularDist::from_dense(std::vector{0.9, 0.1}), TabularDist::from_dense(std::vector{0.6, 0.4}),
      TabularDist::from_dense(std::vector{0.2, 0.8}), TabularDist::from_dense(std::vector{0.9, 0.1}),
  };
  // p(s' | s, a): action 0 steers towards the cheap state 0.
  inst.model.env = {
      TabularDist::from_dense(std::vector{0.8, 0.2}),
      TabularDist::from_dense(std::vector{0.2, 0.8}),
      TabularDist::from_dense(std::vector{0.7, 0.3}),
      TabularDist::from_dense(std::vector{0.3, 0.7}),
  };
  const std::vector<double> state_cost{0.0, 2.0};
  inst.costs = CostParams::from_state_costs(dims, state_cost, 0.15, 0.1);
  inst.init = {TabularDist::uniform(dims.states), kMachine};
  inst.horizon = 2;
  return inst;
}

}  // namespace switching
