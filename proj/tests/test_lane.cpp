#include <doctest.h>

#include <cmath>

#include "switching/lane.hpp"
#include "switching/planner.hpp"
#include "switching/validation.hpp"

using namespace switching;
using namespace switching::lane;

TEST_CASE("default configuration carries the published environment constants") {
  const LaneConfig c;
  CHECK(c.cell_probs[0] == std::array<double, 4>{0.7, 0.2, 0.1, 0.0});
  CHECK(c.cell_probs[1] == std::array<double, 4>{0.6, 0.2, 0.1, 0.1});
  CHECK(c.cell_probs[2] == std::array<double, 4>{0.5, 0.2, 0.1, 0.2});
  CHECK(c.traffic_matrix[0] == std::array<double, 3>{0.99, 0.01, 0.0});
  CHECK(c.traffic_matrix[1] == std::array<double, 3>{0.01, 0.98, 0.01});
  CHECK(c.traffic_matrix[2] == std::array<double, 3>{0.0, 0.01, 0.99});
  CHECK(c.cell_cost == std::array<double, 4>{0.0, 2.0, 4.0, 10.0});
  CHECK(c.horizon == 10);
  CHECK(HumanSpec{}.sigma == 2.0);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("configuration validation and JSON round trip") {
  LaneConfig c;
  c.initial_traffic = Traffic::heavy;
  const auto back = LaneConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  c.cell_probs[0][0] = 0.9;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  LaneConfig d;
  d.horizon = 0;
  CHECK_THROWS_AS(d.validate(), ParameterError);
  CHECK_THROWS(traffic_from_string("rush-hour"));
}

TEST_CASE("state encoding is a bijection on drivable states") {
  // Edge lanes sense one side as `none`: 3 * 4 * 4 * (16 + 4 + 4) drivable states.
  std::size_t valid = 0;
  for (StateId s = 0; s < kNumStates; ++s) {
    if (!is_valid_state(s)) {
      CHECK_THROWS_AS(decode(s), StructuralError);
      continue;
    }
    ++valid;
    CHECK(encode(decode(s)) == s);
  }
  CHECK(kNumStates == 1200);
  CHECK(valid == 1152);

  LaneState s{Traffic::light, Cell::road, Cell::stone, Cell::car, Cell::grass, 1};
  CHECK(decode(encode(s)) == s);
  s.lane = 0;
  CHECK_THROWS_AS(encode(s), StructuralError);
}

TEST_CASE("edge moves keep the lane and enter the straight cell") {
  const LaneState s{Traffic::no_car, Cell::road, Cell::none, Cell::grass, Cell::stone, 0};
  CHECK(target_lane(0, kLeft) == 0);
  CHECK(target_lane(0, kRight) == 1);
  CHECK(target_lane(2, kRight) == 2);
  CHECK(candidate_cell(s, kLeft) == Cell::grass);
  CHECK(candidate_cell(s, kRight) == Cell::stone);

  const LaneEnvironment env;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto [next, cost] = env.env_step(s, kLeft, rng);
    CHECK(next.lane == 0);
    CHECK(next.current == Cell::grass);
    CHECK(next.left == Cell::none);
    CHECK(cost == 0.0);
  }
  const LaneState on_stone{Traffic::heavy, Cell::stone, Cell::road, Cell::road, Cell::road, 1};
  CHECK(env.env_step(on_stone, kStraight, rng).second == 4.0);
  CHECK_THROWS_AS(env.env_cost(Cell::none), StructuralError);
}

TEST_CASE("exact transition rows are distributions with the right traffic marginal") {
  const LaneEnvironment env;
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    StateId id = 0;
    do {
      id = static_cast<StateId>(rng.below(kNumStates));
    } while (!is_valid_state(id));
    const LaneState s = decode(id);
    const auto a = static_cast<ActionId>(rng.below(3));
    const auto p = env.true_env_dist(s, a);
    double total = 0.0;
    std::array<double, 3> traffic{};
    for (const auto& [n, q] : p.support()) {
      total += q;
      const LaneState ns = decode(n);
      traffic[static_cast<int>(ns.traffic)] += q;
      CHECK(ns.lane == target_lane(s.lane, a));
      CHECK(ns.current == candidate_cell(s, a));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    for (int g = 0; g < 3; ++g) {
      CHECK(traffic[g] == doctest::Approx(env.config().traffic_matrix[static_cast<int>(s.traffic)][g]).epsilon(1e-12));
    }
  }
}

TEST_CASE("initial distribution starts on the middle road cell") {
  LaneConfig c;
  c.initial_traffic = Traffic::light;
  const LaneEnvironment env(c);
  double total = 0.0;
  const auto start = env.initial_distribution();
  for (const auto& [s, p] : start.support()) {
    const LaneState ls = decode(s);
    CHECK(ls.lane == 1);
    CHECK(ls.current == Cell::road);
    CHECK(ls.traffic == Traffic::light);
    total += p;
  }
  CHECK(total == doctest::Approx(1.0));
  const LaneEnvironment uniform;
  std::array<double, 3> mass{};
  const auto uniform_start = uniform.initial_distribution();
  for (const auto& [s, p] : uniform_start.support()) mass[s / 400] += p;
  for (double m : mass) CHECK(m == doctest::Approx(1.0 / 3.0));
}

// Reference probabilities from 30-digit numerical integration.
TEST_CASE("human win probabilities match high-precision integration") {
  auto check = [](std::array<double, 3> c, double sigma, std::array<double, 3> want) {
    const auto got = human_win_probabilities(c, sigma);
    for (int i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-9));
  };
  check({0, 2, 10}, 2.0, {0.76023214985144638, 0.23973893081459913, 2.8919333954499538e-5});
  check({0, 0, 4}, 1.0, {0.49991287136917104, 0.49991287136917104, 0.00017425726165792645});
  check({2, 0, 2}, 0.5, {0.0022517388596946697, 0.99549652228061066, 0.0022517388596946697});
  check({10, 4, 0}, 3.0, {0.0043175965863743441, 0.17155154964596592, 0.82413085376765973});
  check({0, 0, 0}, 2.0, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
}

TEST_CASE("human policy evaluates a blocked edge move as the straight cell") {
  const auto env = std::make_shared<const LaneEnvironment>();
  const HumanAgent human(env, {2.0});
  const LaneState s{Traffic::light, Cell::road, Cell::none, Cell::grass, Cell::car, 0};
  const auto p = human.policy_dist(encode(s));
  const auto want = human_win_probabilities({2.0, 2.0, 10.0}, 2.0);
  for (ActionId a = 0; a < 3; ++a) CHECK(p.prob(a) == doctest::Approx(want[a]).epsilon(1e-12));
}

TEST_CASE("samplers agree with their exact distributions") {
  const auto human = check_human_sampler(5, 200000, 12);
  CHECK_MESSAGE(human.passed, human.detail);
  const auto env = check_env_sampler(5, 200000, 13);
  CHECK_MESSAGE(env.passed, env.detail);
}

TEST_CASE("machine training is deterministic per seed") {
  const LaneEnvironment env;
  QLearningOptions q;
  q.episodes = 3000;
  const auto a = train_machine_policy(env, MachineTrainer::q_learning, q);
  const auto b = train_machine_policy(env, MachineTrainer::q_learning, q);
  CHECK(a.table() == b.table());
  q.seed = 2;
  const auto c = train_machine_policy(env, MachineTrainer::q_learning, q);
  CHECK(a.table() != c.table());
}

TEST_CASE("no driver beats the full-knowledge driving optimum") {
  const auto env = std::make_shared<const LaneEnvironment>();
  const auto machine = std::make_shared<const MachineAgent>(train_machine_policy(*env));
  const auto human = std::make_shared<const HumanAgent>(env, HumanSpec{2.0});
  const auto model = team_model(*env, {machine, human});
  const auto free = CostParams::from_state_costs(model.dims, env->state_costs(), 0.0, 0.0);
  const InitialCondition init{env->initial_distribution(), kMachine};
  const double best = optimal_driving_cost(*env, init.state);
  const double team = exact_backward_dp(model, free, 10).values.expected_start(init);
  const double m = evaluate_policy(SwitchingPolicy::constant(10, kNumStates, 2, kMachine), model, free).expected_start(init);
  const double h = evaluate_policy(SwitchingPolicy::constant(10, kNumStates, 2, kHuman), model, free).expected_start(init);
  CHECK(best <= team + 1e-9);
  CHECK(team <= m + 1e-9);
  CHECK(team <= h + 1e-9);
}

TEST_CASE("no-traffic view only rewrites the traffic level") {
  const LaneState s{Traffic::heavy, Cell::grass, Cell::car, Cell::road, Cell::stone, 1};
  const LaneState v = no_traffic_view(s);
  CHECK(v.traffic == Traffic::no_car);
  CHECK(v.left == Cell::car);
  CHECK(v.current == Cell::grass);
}

TEST_CASE("trajectory strips place sensed cells in absolute lanes") {
  const LaneState a{Traffic::no_car, Cell::road, Cell::road, Cell::grass, Cell::stone, 1};
  const LaneState b{Traffic::light, Cell::stone, Cell::none, Cell::car, Cell::road, 0};
  const auto strip = trajectory_strip({encode(a), encode(b)}, {kMachine, kHuman});
  REQUIRE(strip.size() == 2);
  CHECK(strip[0]["ahead"] == nlohmann::json::array({"road", "grass", "stone"}));
  CHECK(strip[0]["controller"] == "machine");
  CHECK(strip[1]["ahead"] == nlohmann::json::array({"car", "road", nullptr}));
  CHECK(strip[1]["lane"] == 0);
  CHECK(strip[1]["controller"] == "human");
  CHECK(strip[1]["traffic"] == "light");
  CHECK(strip[1]["t"] == 2);
}
