#include "switching/types.hpp"

#include <algorithm>
#include <cmath>

namespace switching {

namespace {

void require_finite_nonneg(std::span<const double> table, const char* name) {
  for (double v : table) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ParameterError(std::string(name) + " entries must be finite and >= 0");
    }
  }
}

}  // namespace

CostParams::CostParams(Dims dims, std::vector<double> env_cost, std::vector<double> control_cost,
                       std::vector<double> switch_cost)
    : dims_(dims),
      env_cost_(std::move(env_cost)),
      control_cost_(std::move(control_cost)),
      switch_cost_(std::move(switch_cost)) {
  if (dims_.agents == 0) throw StructuralError("at least one agent is required");
  if (env_cost_.size() != dims_.states * dims_.actions) throw StructuralError("env cost table has wrong size");
  if (control_cost_.size() != dims_.agents) throw StructuralError("control cost table has wrong size");
  if (switch_cost_.size() != dims_.agents * dims_.agents) throw StructuralError("switch cost table has wrong size");
  require_finite_nonneg(env_cost_, "env cost");
  require_finite_nonneg(control_cost_, "control cost");
  require_finite_nonneg(switch_cost_, "switch cost");
  for (AgentId d = 0; d < dims_.agents; ++d) {
    if (switching(d, d) != 0.0) throw ParameterError("switch cost c_x(d, d) must be 0");
  }
}

CostParams CostParams::from_state_costs(Dims dims, std::span<const double> state_cost, double control_human,
                                        double switch_cost) {
  if (state_cost.size() != dims.states) throw StructuralError("state cost table has wrong size");
  std::vector<double> env(dims.states * dims.actions);
  for (std::size_t s = 0; s < dims.states; ++s) {
    std::fill_n(env.begin() + static_cast<std::ptrdiff_t>(s * dims.actions), dims.actions, state_cost[s]);
  }
  std::vector<double> control(dims.agents, control_human);
  if (!control.empty()) control[kMachine] = 0.0;
  std::vector<double> sw(dims.agents * dims.agents, 0.0);
  for (std::size_t d = 0; d < dims.agents; ++d) {
    for (std::size_t p = 0; p < dims.agents; ++p) {
      if (d != p) sw[d * dims.agents + p] = switch_cost;
    }
  }
  return CostParams(dims, std::move(env), std::move(control), std::move(sw));
}

double immediate_switch_cost(AgentId d, AgentId d_prev, const CostParams& costs) {
  const auto n = costs.dims().agents;
  if (d >= n || d_prev >= n) throw StructuralError("agent id out of range");
  return costs.control(d) + costs.switching(d, d_prev);
}

double trajectory_cost(const Trajectory& traj, const CostParams& costs) {
  const Dims& dims = costs.dims();
  if (traj.steps.empty()) throw StructuralError("trajectory must have at least one step");
  if (traj.initial_agent >= dims.agents || traj.initial_state >= dims.states) {
    throw StructuralError("trajectory initial condition out of range");
  }
  if (traj.steps.front().state != traj.initial_state) {
    throw StructuralError("first step must start at the initial state");
  }
  double total = 0.0;
  AgentId prev = traj.initial_agent;
  for (const Step& st : traj.steps) {
    if (st.state >= dims.states || st.agent >= dims.agents || st.action >= dims.actions) {
      throw StructuralError("trajectory step out of range");
    }
    total += costs.env(st.state, st.action) + costs.control(st.agent) + costs.switching(st.agent, prev);
    prev = st.agent;
  }
  return total;
}

TabularDist::TabularDist(std::size_t universe, std::vector<Entry> support)
    : universe_(universe), support_(std::move(support)) {
  std::sort(support_.begin(), support_.end(), [](const Entry& a, const Entry& b) { return a.first < b.first; });
  double total = 0.0;
  for (std::size_t i = 0; i < support_.size(); ++i) {
    const auto& [idx, p] = support_[i];
    if (idx >= universe_) throw StructuralError("distribution index out of universe");
    if (i > 0 && support_[i - 1].first == idx) throw StructuralError("duplicate distribution index");
    if (!(p >= 0.0) || !std::isfinite(p)) throw ParameterError("probabilities must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > kMassTolerance) throw ParameterError("probabilities must sum to 1");
}

TabularDist TabularDist::uniform(std::size_t universe) {
  std::vector<Entry> sup(universe);
  const double p = 1.0 / static_cast<double>(universe);
  for (std::size_t i = 0; i < universe; ++i) sup[i] = {static_cast<std::uint32_t>(i), p};
  return TabularDist(universe, std::move(sup));
}

TabularDist TabularDist::point(std::size_t universe, std::uint32_t index) {
  return TabularDist(universe, {{index, 1.0}});
}

TabularDist TabularDist::from_dense(std::span<const double> probs) {
  std::vector<Entry> sup;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] != 0.0) sup.emplace_back(static_cast<std::uint32_t>(i), probs[i]);
  }
  return TabularDist(probs.size(), std::move(sup));
}

double TabularDist::prob(std::uint32_t index) const {
  auto it = std::lower_bound(support_.begin(), support_.end(), index,
                             [](const Entry& e, std::uint32_t i) { return e.first < i; });
  return (it != support_.end() && it->first == index) ? it->second : 0.0;
}

std::vector<double> TabularDist::dense() const {
  std::vector<double> out(universe_, 0.0);
  for (const auto& [i, p] : support_) out[i] = p;
  return out;
}

double TabularDist::expectation(std::span<const double> weights) const {
  if (weights.size() != universe_) throw StructuralError("weight vector does not match universe");
  double acc = 0.0;
  for (const auto& [i, p] : support_) acc += p * weights[i];
  return acc;
}

}  // namespace switching
