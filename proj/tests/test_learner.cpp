#include <doctest.h>

#include <cmath>

#include "switching/environment.hpp"
#include "switching/learner.hpp"
#include "switching/regret.hpp"

using namespace switching;

namespace {

std::vector<Team> tiny_teams(std::size_t n, const std::string& kind, std::shared_ptr<TransitionCounts> shared,
                             std::uint64_t seed) {
  const auto inst = tiny_instance();
  const auto env = inst.environment();
  std::vector<Team> teams;
  for (std::size_t i = 0; i < n; ++i) {
    std::unique_ptr<Learner> l;
    if (kind == "ucrl2mc") {
      l = std::make_unique<Ucrl2McLearner>(inst.model.dims, inst.horizon, 0.1, inst.costs, shared);
    } else {
      l = std::make_unique<Ucrl2Learner>(inst.model.dims, inst.horizon, 0.1);
    }
    teams.push_back({env, inst.agents(), inst.costs, std::move(l), Rng(seed).split(i), kMachine});
  }
  return teams;
}

}  // namespace

TEST_CASE("episode logs round-trip and reproduce their realized cost") {
  const auto inst = tiny_instance();
  const auto env = inst.environment();
  Rng rng(9);
  const auto policy = SwitchingPolicy::constant(inst.horizon, 2, 2, kHuman);
  const auto log = run_episode(*env, inst.agents(), inst.costs, policy, rng);
  CHECK(log.steps.size() == inst.horizon);
  CHECK(log.policy_hash == policy.hash());
  CHECK(log.steps.front().t == 1);
  CHECK(log.steps.front().c_switch == doctest::Approx(0.1));
  CHECK(log.steps.back().c_switch == 0.0);
  CHECK(EpisodeLog::from_json(log.to_json()) == log);
  CHECK(log.realized_cost() == doctest::Approx(trajectory_cost(log.trajectory(), inst.costs)));
  for (std::size_t t = 0; t + 1 < log.steps.size(); ++t) CHECK(log.steps[t].s_next == log.steps[t + 1].s);
}

TEST_CASE("learner counts equal a recount of the observed logs") {
  const auto inst = tiny_instance();
  const auto env = inst.environment();
  Ucrl2McLearner learner(inst.model.dims, inst.horizon, 0.1, inst.costs);
  Rng rng(4);
  CountStore naive(inst.model.dims, inst.horizon);
  const auto history = run_learner(*env, inst.agents(), inst.costs, learner, 200, rng);
  for (const auto& log : history.episodes) {
    for (const auto& st : log.steps) record_step(naive, st.s, st.d, st.a, st.s_next);
  }
  CHECK(learner.agent_counts() == naive.agent);
  CHECK(learner.env_counts() == naive.env);
  CHECK(learner.episodes() == 200);
  for (std::size_t k = 0; k < history.episodes.size(); ++k) CHECK(history.episodes[k].k == k + 1);
}

TEST_CASE("first episode plans with whole-simplex balls") {
  const auto inst = tiny_instance();
  Ucrl2McLearner learner(inst.model.dims, inst.horizon, 0.1, inst.costs);
  const auto sets = learner.confidence_sets();
  for (const auto& b : sets.agent) CHECK(b.covers_simplex());
  for (const auto& b : sets.env) CHECK(b.covers_simplex());
}

TEST_CASE("runs are reproducible from the seed") {
  const auto inst = tiny_instance();
  const auto env = inst.environment();
  auto go = [&](std::uint64_t seed) {
    Rng rng(seed);
    return run_ucrl2mc(*env, inst.agents(), 50, inst.horizon, 0.1, inst.costs, rng).episodes;
  };
  CHECK(go(3) == go(3));
  CHECK(go(3) != go(4));
}

TEST_CASE("coordinator checkpoints resume to the same trajectory") {
  for (const std::string kind : {"ucrl2mc", "ucrl2"}) {
    auto shared = kind == "ucrl2mc" ? std::make_shared<TransitionCounts>(2, 2, 2) : nullptr;
    Coordinator straight(tiny_teams(3, kind, shared, 5), shared);
    std::vector<EpisodeLog> a;
    straight.run(40, [&](std::size_t, const EpisodeLog& l, const SwitchingPolicy&) { a.push_back(l); });

    auto shared2 = kind == "ucrl2mc" ? std::make_shared<TransitionCounts>(2, 2, 2) : nullptr;
    Coordinator first(tiny_teams(3, kind, shared2, 5), shared2);
    std::vector<EpisodeLog> b;
    auto keep = [&](std::size_t, const EpisodeLog& l, const SwitchingPolicy&) { b.push_back(l); };
    first.run(17, keep);
    const auto snapshot = nlohmann::json::parse(first.checkpoint().dump());

    auto shared3 = kind == "ucrl2mc" ? std::make_shared<TransitionCounts>(2, 2, 2) : nullptr;
    Coordinator second(tiny_teams(3, kind, shared3, 5), shared3);
    second.restore(snapshot);
    CHECK(second.rounds() == 17);
    second.run(23, keep);
    CHECK(a == b);
  }
}

TEST_CASE("shared environment counts collect every team's transitions") {
  auto shared = std::make_shared<TransitionCounts>(2, 2, 2);
  Coordinator coord(tiny_teams(4, "ucrl2mc", shared, 8), shared);
  std::vector<TransitionCounts> own(4, TransitionCounts(2, 2, 2));
  coord.run(30, [&](std::size_t team, const EpisodeLog& l, const SwitchingPolicy&) {
    for (const auto& st : l.steps) own[team].record(st.s, st.a, st.s_next);
  });
  std::uint64_t total = 0;
  for (const auto& c : own) total += c.total();
  CHECK(shared->total() == total);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& l = dynamic_cast<const Ucrl2McLearner&>(*coord.team(i).learner);
    CHECK(l.shares_env());
    CHECK(l.agent_counts().total() == own[i].total());
    CHECK(l.env_counts().total() == total);
  }
}

TEST_CASE("restore rejects checkpoints of another shape") {
  Coordinator a(tiny_teams(2, "ucrl2", nullptr, 1));
  Coordinator b(tiny_teams(3, "ucrl2", nullptr, 1));
  CHECK_THROWS_AS(b.restore(a.checkpoint()), StructuralError);
  Coordinator c(tiny_teams(2, "ucrl2mc", nullptr, 1));
  CHECK_THROWS_AS(c.restore(a.checkpoint()), StructuralError);
}

TEST_CASE("baseline known-cost mode matches the augmented expected cost") {
  const auto inst = tiny_instance();
  const auto cost = augmented_expected_cost(inst.model, inst.costs);
  // (s = 1, d_prev = machine, d = human): 0.15 + 0.1 + 2
  CHECK(cost[(1 * 2 + 0) * 2 + 1] == doctest::Approx(2.25));
  Ucrl2Learner known(inst.model.dims, inst.horizon, 0.1, cost);
  CHECK(known.optimistic_mdp().cost == cost);
  Ucrl2Learner learned(inst.model.dims, inst.horizon, 0.1);
  for (double c : learned.optimistic_mdp().cost) CHECK(c == 0.0);
}

TEST_CASE("learners save and load their statistics") {
  const auto inst = tiny_instance();
  const auto env = inst.environment();
  Ucrl2McLearner a(inst.model.dims, inst.horizon, 0.1, inst.costs);
  Rng rng(2);
  run_learner(*env, inst.agents(), inst.costs, a, 30, rng);
  Ucrl2McLearner b(inst.model.dims, inst.horizon, 0.1, inst.costs);
  b.load(nlohmann::json::parse(a.save().dump()));
  CHECK(b.episodes() == 30);
  CHECK(b.plan() == a.plan());

  Ucrl2Learner c(inst.model.dims, inst.horizon, 0.1);
  run_learner(*env, inst.agents(), inst.costs, c, 30, rng);
  Ucrl2Learner d(inst.model.dims, inst.horizon, 0.1);
  d.load(nlohmann::json::parse(c.save().dump()));
  CHECK(d.plan() == c.plan());
}

TEST_CASE("fixed agents deploy constant policies") {
  const auto m = make_fixed_agent(kMachine, 3, 4, 2);
  const auto h = make_fixed_agent(kHuman, 3, 4, 2);
  CHECK(m->name() == "machine");
  CHECK(h->name() == "human");
  CHECK(m->plan() == SwitchingPolicy::constant(3, 4, 2, kMachine));
  CHECK(h->plan() == SwitchingPolicy::constant(3, 4, 2, kHuman));
  CHECK_THROWS_AS(make_fixed_agent(2, 3, 4, 2), StructuralError);
}
