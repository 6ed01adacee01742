#include <doctest.h>

#include <cmath>
#include <set>

#include "switching/rng.hpp"
#include "switching/types.hpp"

using namespace switching;

TEST_CASE("tabular distributions validate their support") {
  CHECK_NOTHROW(TabularDist(3, {{0, 0.25}, {2, 0.75}}));
  CHECK_THROWS_AS(TabularDist(3, {{0, 0.5}, {1, 0.4}}), ParameterError);
  CHECK_THROWS_AS(TabularDist(3, {{0, 1.2}, {1, -0.2}}), ParameterError);
  CHECK_THROWS_AS(TabularDist(3, {{0, 0.5}, {3, 0.5}}), StructuralError);
  CHECK_THROWS(TabularDist(3, {{1, 0.5}, {1, 0.5}}));

  const auto u = TabularDist::uniform(4);
  for (std::uint32_t i = 0; i < 4; ++i) CHECK(u.prob(i) == doctest::Approx(0.25));
  const auto p = TabularDist::point(5, 3);
  CHECK(p.prob(3) == 1.0);
  CHECK(p.prob(2) == 0.0);
  const std::vector<double> dense{0.1, 0.0, 0.9};
  CHECK(TabularDist::from_dense(dense).dense() == dense);
  const std::vector<double> w{1.0, 5.0, 3.0};
  CHECK(TabularDist::from_dense(dense).expectation(w) == doctest::Approx(2.8));
}

TEST_CASE("index helpers round-trip") {
  for (StateId s = 0; s < 7; ++s) {
    for (AgentId d = 0; d < 3; ++d) {
      CHECK(augmented_decode(augmented_index(s, d, 3), 3) == std::pair{s, d});
      CHECK(middle_decode(middle_index(s, d, 3), 3) == std::pair{s, d});
    }
  }
}

TEST_CASE("trajectory cost adds environment, control and switching terms") {
  const Dims dims{2, 2, 2};
  const std::vector<double> state_cost{1.0, 3.0};
  const auto costs = CostParams::from_state_costs(dims, state_cost, 0.2, 0.1);
  CHECK(costs.control(kMachine) == 0.0);
  CHECK(costs.control(kHuman) == 0.2);
  CHECK(costs.switching(kHuman, kMachine) == 0.1);
  CHECK(costs.switching(kHuman, kHuman) == 0.0);
  CHECK(immediate_switch_cost(kHuman, kMachine, costs) == doctest::Approx(0.3));

  Trajectory traj;
  traj.initial_agent = kMachine;
  traj.steps = {{0, kMachine, 0}, {1, kHuman, 1}, {1, kHuman, 0}, {0, kMachine, 1}};
  // 1 + (3 + 0.3) + (3 + 0.2) + (1 + 0.1)
  CHECK(trajectory_cost(traj, costs) == doctest::Approx(8.6));
}

TEST_CASE("alternating controllers pay a switch every step") {
  const Dims dims{1, 2, 1};
  const std::vector<double> state_cost{0.0};
  const auto costs = CostParams::from_state_costs(dims, state_cost, 0.0, 1.0);
  Trajectory traj;
  for (int t = 0; t < 10; ++t) traj.steps.push_back({0, static_cast<AgentId>((t + 1) % 2), 0});
  CHECK(trajectory_cost(traj, costs) == doctest::Approx(10.0));
}

TEST_CASE("rng streams are reproducible and restorable") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(7);
  const auto snapshot = c.save();
  std::vector<double> first;
  for (int i = 0; i < 20; ++i) first.push_back(c.normal());
  Rng d(0);
  d.restore(snapshot);
  for (int i = 0; i < 20; ++i) CHECK(d.normal() == first[i]);

  const Rng parent(3);
  CHECK(parent.split(1).seed() == parent.split(1).seed());
  CHECK(parent.split(1).seed() != parent.split(2).seed());
  CHECK_THROWS(d.restore("garbage"));
}

TEST_CASE("rng categorical and below respect their ranges") {
  Rng rng(11);
  const std::vector<double> w{0.0, 1.0, 0.0, 3.0};
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 40000; ++i) ++hits[rng.categorical(w)];
  CHECK(hits[0] == 0);
  CHECK(hits[2] == 0);
  CHECK(std::abs(hits[3] / 40000.0 - 0.75) < 0.015);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.below(5);
    CHECK(v < 5);
    seen.insert(v);
  }
  CHECK(seen.size() == 5);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / 1e5) < 0.02);
  CHECK(std::abs(sq / 1e5 - 1.0) < 0.02);
}
