#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "switching/environment.hpp"
#include "switching/lane.hpp"
#include "switching/learner.hpp"
#include "switching/planner.hpp"
#include "switching/validation.hpp"

using namespace switching;

namespace {

double max_diff(const ValueTable& a, const ValueTable& b) {
  REQUIRE(a.table().size() == b.table().size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.table().size(); ++i) m = std::max(m, std::abs(a.table()[i] - b.table()[i]));
  return m;
}

ConfidenceSets random_sets(const SwitchingModel& model, Rng& rng) {
  ConfidenceSets sets;
  sets.dims = model.dims;
  for (const auto& d : model.agent) sets.agent.push_back({d, 2.0 * rng.uniform() * rng.uniform()});
  for (const auto& d : model.env) sets.env.push_back({d, 2.0 * rng.uniform() * rng.uniform()});
  return sets;
}

OptimisticMdp flat_mdp(const SwitchingModel& model, const CostParams& costs) {
  const auto& dims = model.dims;
  OptimisticMdp mdp;
  mdp.states = dims.states * dims.agents;
  mdp.actions = dims.agents;
  mdp.cost = augmented_expected_cost(model, costs);
  for (StateId s = 0; s < dims.states; ++s) {
    for (AgentId dp = 0; dp < dims.agents; ++dp) {
      for (AgentId d = 0; d < dims.agents; ++d) {
        std::vector<double> row(mdp.states, 0.0);
        for (const auto& [a, pa] : model.agent_dist(s, d).support()) {
          for (const auto& [n, pn] : model.env_dist(s, a).support()) row[augmented_index(n, d, dims.agents)] += pa * pn;
        }
        mdp.transition.push_back({TabularDist::from_dense(row), 0.0});
      }
    }
  }
  return mdp;
}

}  // namespace

TEST_CASE("parallel kernels equal the serial reference") {
  Rng rng(31);
  for (int i = 0; i < 25; ++i) {
    const Dims dims{2 + rng.below(6), 2 + rng.below(2), 2 + rng.below(3)};
    const std::size_t L = 1 + rng.below(6);
    const auto inst = random_instance(dims, L, rng);
    const auto fast = exact_backward_dp(inst.model, inst.costs, L);
    const auto ref = reference::exact_backward_dp(inst.model, inst.costs, L);
    CHECK(max_diff(fast.values, ref.values) <= 1e-12);
    CHECK(fast.policy == ref.policy);

    const auto sets = random_sets(inst.model, rng);
    const auto ofast = optimistic_backward_dp(sets, inst.costs, L);
    const auto oref = reference::optimistic_backward_dp(sets, inst.costs, L);
    CHECK(max_diff(ofast.values, oref.values) <= 1e-12);
    CHECK(ofast.policy == oref.policy);

    SwitchingPolicy pi(L, dims.states, dims.agents);
    for (auto& d : pi.table()) d = static_cast<AgentId>(rng.below(dims.agents));
    CHECK(max_diff(evaluate_policy(pi, inst.model, inst.costs),
                   reference::evaluate_policy(pi, inst.model, inst.costs)) <= 1e-12);
  }
}

TEST_CASE("parallel and serial exact DP agree on the lane team model") {
  const auto env = std::make_shared<const lane::LaneEnvironment>();
  const auto machine =
      std::make_shared<const lane::MachineAgent>(lane::train_machine_policy(*env, lane::MachineTrainer::exact_dp));
  const auto human = std::make_shared<const lane::HumanAgent>(env, lane::HumanSpec{2.0});
  const auto model = lane::team_model(*env, {machine, human});
  const auto costs = CostParams::from_state_costs(model.dims, env->state_costs(), 0.2, 0.1);
  const auto fast = exact_backward_dp(model, costs, 10);
  const auto ref = reference::exact_backward_dp(model, costs, 10);
  CHECK(max_diff(fast.values, ref.values) <= 1e-12);
  CHECK(fast.policy == ref.policy);
}

TEST_CASE("the optimal policy evaluates to its own value table") {
  Rng rng(8);
  for (int i = 0; i < 10; ++i) {
    const auto inst = random_instance(Dims{5, 2, 3}, 4, rng);
    const auto plan = exact_backward_dp(inst.model, inst.costs, 4);
    CHECK(max_diff(evaluate_policy(plan.policy, inst.model, inst.costs), plan.values) <= 1e-12);
  }
}

TEST_CASE("policy evaluation equals forward path enumeration") {
  Rng rng(13);
  for (int i = 0; i < 10; ++i) {
    const Dims dims{3, 2, 2};
    const auto inst = random_instance(dims, 3, rng);
    SwitchingPolicy pi(3, dims.states, dims.agents);
    for (auto& d : pi.table()) d = static_cast<AgentId>(rng.below(2));
    const auto v = evaluate_policy(pi, inst.model, inst.costs);
    for (StateId s = 0; s < dims.states; ++s) {
      for (AgentId d0 = 0; d0 < 2; ++d0) {
        CHECK(v(0, s, d0) == doctest::Approx(enumerate_policy_value(pi, inst.model, inst.costs, s, d0)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("exact DP matches the best of all 256 tiny policies") {
  const auto r = check_dp_enumeration(10, 99);
  CHECK_MESSAGE(r.passed, r.detail);
}

TEST_CASE("zero-radius balls reproduce exact DP and wider balls are optimistic") {
  const auto zero = check_zero_radius(10, 4);
  CHECK_MESSAGE(zero.passed, zero.detail);
  const auto opt = check_optimism(10, 5);
  CHECK_MESSAGE(opt.passed, opt.detail);
}

TEST_CASE("optimistic values shrink as balls grow") {
  Rng rng(21);
  const auto inst = random_instance(Dims{4, 2, 3}, 5, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double r : {0.0, 0.1, 0.3, 0.8, 1.5, 2.0}) {
    ConfidenceSets sets;
    sets.dims = inst.model.dims;
    for (const auto& d : inst.model.agent) sets.agent.push_back({d, r});
    for (const auto& d : inst.model.env) sets.env.push_back({d, r});
    const double v = optimistic_backward_dp(sets, inst.costs, 5).values.expected_start(inst.init);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
}

TEST_CASE("extended value iteration with zero radii solves the flat MDP") {
  Rng rng(17);
  for (int i = 0; i < 10; ++i) {
    const Dims dims{3 + rng.below(3), 2, 2 + rng.below(2)};
    const std::size_t L = 2 + rng.below(4);
    const auto inst = random_instance(dims, L, rng);
    const auto exact = exact_backward_dp(inst.model, inst.costs, L);
    const auto plan = extended_value_iteration(flat_mdp(inst.model, inst.costs), L);
    for (std::size_t t = 0; t <= L; ++t) {
      for (StateId s = 0; s < dims.states; ++s) {
        for (AgentId dp = 0; dp < dims.agents; ++dp) {
          const auto x = static_cast<StateId>(augmented_index(s, dp, dims.agents));
          CHECK(plan.value(t, x) == doctest::Approx(exact.values(t, s, dp)).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("policies and value tables round-trip through JSON") {
  Rng rng(3);
  const auto inst = random_instance(Dims{3, 2, 2}, 3, rng);
  const auto plan = exact_backward_dp(inst.model, inst.costs, 3);
  CHECK(SwitchingPolicy::from_json(plan.policy.to_json()) == plan.policy);
  CHECK(ValueTable::from_json(plan.values.to_json()).table() == plan.values.table());
  CHECK(plan.policy.hash().size() == 16);
  auto other = plan.policy;
  other.set(0, 0, 0, other(0, 0, 0) == 0 ? 1 : 0);
  CHECK(other.hash() != plan.policy.hash());
}

TEST_CASE("planner rejects mismatched shapes") {
  Rng rng(1);
  const auto inst = random_instance(Dims{3, 2, 2}, 3, rng);
  const SwitchingPolicy wrong(3, 4, 2);
  CHECK_THROWS_AS(evaluate_policy(wrong, inst.model, inst.costs), StructuralError);
  auto broken = inst.model;
  broken.env.pop_back();
  CHECK_THROWS_AS(exact_backward_dp(broken, inst.costs, 3), StructuralError);
}
