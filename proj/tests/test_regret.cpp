#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "switching/environment.hpp"
#include "switching/learner.hpp"
#include "switching/regret.hpp"
#include "switching/validation.hpp"

using namespace switching;

TEST_CASE("sublinearity score examples") {
  RegretCurve linear;
  for (int k = 0; k < 100; ++k) linear.push(0.5);
  CHECK(sublinearity_score(linear) == doctest::Approx(1.0));

  // Prefix sums of 1/sqrt(k) at K = 2000, summed independently in extended precision.
  RegretCurve root;
  for (int k = 1; k <= 2000; ++k) root.push(1.0 / std::sqrt(static_cast<double>(k)));
  CHECK(sublinearity_score(root) == doctest::Approx(0.4238205204622675).epsilon(1e-10));

  RegretCurve warm;
  for (int k = 0; k < 10; ++k) warm.push(k < 5 ? 1.0 : 0.0);
  CHECK(sublinearity_score(warm) == 0.0);

  RegretCurve short_curve;
  for (int k = 0; k < 3; ++k) short_curve.push(1.0);
  CHECK_THROWS_AS(sublinearity_score(short_curve), ParameterError);
}

TEST_CASE("cumulative regret is the prefix sum of the gaps") {
  RegretCurve c;
  const std::vector<double> d{0.5, 0.25, 0.0, 1.0};
  for (double x : d) c.push(x);
  CHECK(c.cumulative == std::vector<double>{0.5, 0.75, 0.75, 1.75});
  CHECK(c.at(0) == 0.0);
  CHECK(c.at(2) == 0.75);
}

// Values from an independent enumeration of all 256 tiny policies.
TEST_CASE("tiny instance regret matches brute-force enumeration") {
  const auto inst = tiny_instance();
  const RegretOracle oracle(inst.model, inst.costs, inst.init, inst.horizon);
  CHECK(oracle.optimal_value() == doctest::Approx(1.775).epsilon(1e-12));
  CHECK(oracle.regret(SwitchingPolicy::constant(2, 2, 2, kMachine)) == doctest::Approx(0.105).epsilon(1e-12));
  CHECK(oracle.regret(SwitchingPolicy::constant(2, 2, 2, kHuman)) == doctest::Approx(0.405).epsilon(1e-12));
  CHECK(oracle.regret(oracle.optimal().policy) == 0.0);
  CHECK_THROWS_AS(oracle.regret(SwitchingPolicy::constant(3, 2, 2, kMachine)), StructuralError);
}

TEST_CASE("exact regret agrees with Monte-Carlo rollouts") {
  const auto inst = tiny_instance();
  const auto env = inst.environment();
  const RegretOracle oracle(inst.model, inst.costs, inst.init, inst.horizon);
  Rng rng(61);
  for (AgentId d : {kMachine, kHuman}) {
    const auto policy = SwitchingPolicy::constant(2, 2, 2, d);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double c = run_episode(*env, inst.agents(), inst.costs, policy, rng).realized_cost();
      sum += c;
      sq += c * c;
    }
    const double mean = sum / n;
    const double sd = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - oracle.expected_cost(policy)) <= 3.0 * sd);
  }
}

TEST_CASE("learners never show negative regret") {
  const auto inst = tiny_instance();
  const auto env = inst.environment();
  const RegretOracle oracle(inst.model, inst.costs, inst.init, inst.horizon);
  RegretCurve mc, base;
  Rng rng(1);
  run_ucrl2mc(*env, inst.agents(), 300, inst.horizon, 0.1, inst.costs, rng,
              [&](std::size_t, const EpisodeLog&, const SwitchingPolicy& p) { mc.push(oracle.regret(p)); });
  run_ucrl2_baseline(*env, inst.agents(), 300, inst.horizon, 0.1, inst.costs, rng,
                     [&](std::size_t, const EpisodeLog&, const SwitchingPolicy& p) { base.push(oracle.regret(p)); });
  for (const auto* c : {&mc, &base}) {
    for (double d : c->delta) CHECK(d >= -1e-9);
    for (std::size_t k = 1; k < c->cumulative.size(); ++k) CHECK(c->cumulative[k] >= c->cumulative[k - 1]);
  }
}

TEST_CASE("multi-team regret sums the team curves round by round") {
  RegretCurve a, b;
  for (int k = 0; k < 5; ++k) {
    a.push(0.1 * k);
    b.push(1.0);
  }
  const auto one = multi_team_regret({a});
  CHECK(one.delta == a.delta);
  const auto both = multi_team_regret({a, b});
  CHECK(both.total() == doctest::Approx(a.total() + b.total()));
  RegretCurve c;
  c.push(1.0);
  CHECK_THROWS_AS(multi_team_regret({a, c}), StructuralError);
}

TEST_CASE("identical unshared teams sum to N times one team") {
  const auto inst = tiny_instance();
  const RegretOracle oracle(inst.model, inst.costs, inst.init, inst.horizon);
  auto curve_for = [&](std::size_t n) {
    std::vector<Team> teams;
    for (std::size_t i = 0; i < n; ++i) {
      teams.push_back({inst.environment(), inst.agents(), inst.costs,
                       std::make_unique<Ucrl2McLearner>(inst.model.dims, inst.horizon, 0.1, inst.costs), Rng(7),
                       kMachine});
    }
    std::vector<RegretCurve> curves(n);
    Coordinator(std::move(teams)).run(60, [&](std::size_t i, const EpisodeLog&, const SwitchingPolicy& p) {
      curves[i].push(oracle.regret(p));
    });
    return multi_team_regret(curves);
  };
  const auto single = curve_for(1);
  const auto triple = curve_for(3);
  for (std::size_t k = 0; k < single.delta.size(); ++k) CHECK(triple.delta[k] == doctest::Approx(3.0 * single.delta[k]));
}

TEST_CASE("control statistics count human steps and switches") {
  const auto inst = tiny_instance();
  const auto env = inst.environment();
  EpisodeLog machine_only;
  machine_only.d0 = kMachine;
  for (std::size_t t = 1; t <= 10; ++t) machine_only.steps.push_back({t, 0, kMachine, 0, 0, 0, 0, 0});
  const auto m = control_stats(machine_only, *env, 1);
  CHECK(m.human_fraction() == 0.0);
  CHECK(m.switches == 0);

  EpisodeLog alternating;
  alternating.d0 = kMachine;
  for (std::size_t t = 1; t <= 10; ++t) alternating.steps.push_back({t, 0, static_cast<AgentId>(t % 2), 0, 0, 0, 0, 0});
  const auto a = control_stats(alternating, *env, 1);
  CHECK(a.switches == 10);
  CHECK(a.human_fraction() == doctest::Approx(0.5));
  CHECK(ControlStats::from_json(a.to_json()) == a);

  Rng rng(44);
  for (int trial = 0; trial < 50; ++trial) {
    EpisodeLog log;
    log.d0 = static_cast<AgentId>(rng.below(2));
    for (std::size_t t = 1; t <= 12; ++t) {
      log.steps.push_back({t, static_cast<StateId>(rng.below(2)), static_cast<AgentId>(rng.below(2)), 0, 0, 0, 0, 0});
    }
    std::size_t human = 0, sw = 0;
    AgentId prev = log.d0;
    for (const auto& s : log.steps) {
      human += s.d == kHuman;
      sw += s.d != prev;
      prev = s.d;
    }
    const auto st = control_stats(log, *env, 1);
    CHECK(st.human_steps == human);
    CHECK(st.switches == sw);
  }
}

TEST_CASE("regret CSV rows follow the published column contract") {
  char buf[512] = {};
  std::FILE* f = fmemopen(buf, sizeof buf, "w");
  REQUIRE(f);
  RegretCsvWriter w(f);
  w.header();
  ControlStats s;
  s.steps = 10;
  s.human_steps = 3;
  s.switches = 2;
  w.row(1, 7, 10, 0.25, 1.5, s, "heavy");
  std::fclose(f);
  CHECK(std::string(buf) == "team,k,t_steps,delta_k,cum_regret,human_frac,switches,gamma0\n1,7,70,0.25,1.5,0.3,2,heavy\n");
}
