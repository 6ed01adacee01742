#include <doctest.h>

#include <cmath>

#include "switching/confidence.hpp"
#include "switching/rng.hpp"
#include "switching/validation.hpp"

using namespace switching;

TEST_CASE("counts and empirical estimates") {
  CountStore store(Dims{3, 2, 2}, 5);
  CHECK(empirical_env_dist(store, 0, 1).dense() == std::vector<double>(3, 1.0 / 3.0));
  CHECK(empirical_agent_dist(store, 2, 1).dense() == std::vector<double>{0.5, 0.5});

  record_step(store, 0, 1, 1, 2);
  record_step(store, 0, 1, 1, 2);
  record_step(store, 0, 1, 0, 1);
  record_step(store, 0, 0, 1, 0);
  CHECK(store.agent.visits(0, 1) == 3);
  CHECK(store.agent.visits(0, 1, 1) == 2);
  CHECK(store.env.visits(0, 1) == 3);
  CHECK(store.env.visits(0, 1, 2) == 2);
  CHECK(store.env.visits(0, 1, 1) == 0);
  CHECK(empirical_env_dist(store, 0, 1).prob(2) == doctest::Approx(2.0 / 3.0));
  CHECK(empirical_env_dist(store, 0, 1).prob(0) == doctest::Approx(1.0 / 3.0));
  CHECK(empirical_agent_dist(store, 0, 1).prob(0) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(record_step(store, 3, 0, 0, 0), StructuralError);
  CHECK_THROWS_AS(record_step(store, 0, 2, 0, 0), StructuralError);

  const auto back = CountStore::from_json(store.to_json());
  CHECK(back == store);
}

TEST_CASE("counts match a naive recount of random transitions") {
  Rng rng(5);
  TransitionCounts counts(4, 3, 4);
  std::vector<std::uint64_t> naive(4 * 3 * 4, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto s = static_cast<StateId>(rng.below(4));
    const auto a = static_cast<ActionId>(rng.below(3));
    const auto n = static_cast<StateId>(rng.below(4));
    counts.record(s, a, n);
    ++naive[(s * 3 + a) * 4 + n];
  }
  for (StateId s = 0; s < 4; ++s) {
    for (ActionId a = 0; a < 3; ++a) {
      std::uint64_t row = 0;
      for (StateId n = 0; n < 4; ++n) {
        CHECK(counts.visits(s, a, n) == naive[(s * 3 + a) * 4 + n]);
        row += naive[(s * 3 + a) * 4 + n];
      }
      CHECK(counts.visits(s, a) == row);
    }
  }
  CHECK(counts.total() == 5000);
}

// Reference radii computed with 40-digit arithmetic from the closed forms.
TEST_CASE("confidence radii match high-precision values") {
  const Dims lane{1200, 2, 3};
  CHECK(beta_agent(50, 0.05, 3, 10, lane) == doctest::Approx(1.1751029048897419).epsilon(1e-12));
  CHECK(beta_agent(1000000, 0.1, 5000, 10, lane) == doctest::Approx(0.013311306899205891).epsilon(1e-12));
  CHECK(beta_agent(1, 0.1, 2, 10, Dims{2, 2, 2}) == 2.0);
  CHECK(beta_env(1000, 0.1, 11, 10, 1200, 3) == doctest::Approx(1.3230247385229418).epsilon(1e-12));
  CHECK(beta_env(100000, 0.1, 5000, 10, 1200, 3) == doctest::Approx(0.13555058730383914).epsilon(1e-12));
  CHECK(beta_env(400, 0.1, 101, 10, 6, 3) == doctest::Approx(0.54036688493876448).epsilon(1e-12));
  CHECK(beta_ucrl2(1000000, 0.1, 101, 10, 2400, 2) == doctest::Approx(0.78585192878869929).epsilon(1e-12));
  CHECK(beta_ucrl2(100000, 0.1, 1001, 2, 4, 2) == doctest::Approx(0.084253205956061454).epsilon(1e-12));
}

TEST_CASE("radii are 2 before any data and shrink with visits") {
  CHECK(beta_env(0, 0.1, 1, 10, 1200, 3) == 2.0);
  CHECK(beta_env(500, 0.1, 1, 10, 1200, 3) == 2.0);
  CHECK(beta_agent(0, 0.1, 9, 10, Dims{4, 2, 3}) == 2.0);
  double prev = 2.0;
  for (std::uint64_t n = 1; n < 1u << 20; n *= 2) {
    const double r = beta_agent(n, 0.1, 50, 10, Dims{4, 2, 3});
    CHECK(r <= prev);
    prev = r;
  }
  CHECK(prev < 0.05);
  CHECK_THROWS_AS(beta_env(1, 0.0, 2, 10, 4, 2), ParameterError);
  CHECK_THROWS_AS(beta_env(1, 1.5, 2, 10, 4, 2), ParameterError);
}

TEST_CASE("lane environment balls stay at the simplex diameter below about 459 visits at k = 5000") {
  CHECK(beta_env(459, 0.1, 5000, 10, 1200, 3) == 2.0);
  CHECK(beta_env(460, 0.1, 5000, 10, 1200, 3) < 2.0);
}

TEST_CASE("l1 kernel examples") {
  const std::vector<double> w{3.0, 1.0, 2.0};
  const L1Ball ball{TabularDist::from_dense(std::vector{0.5, 0.2, 0.3}), 0.4};
  const auto sol = l1_optimistic_min(w, ball);
  // 0.2 extra mass onto index 1, taken from index 0.
  CHECK(sol.dist.prob(1) == doctest::Approx(0.4));
  CHECK(sol.dist.prob(0) == doctest::Approx(0.3));
  CHECK(sol.dist.prob(2) == doctest::Approx(0.3));
  CHECK(sol.value == doctest::Approx(0.9 + 0.4 + 0.6));

  const auto full = l1_optimistic_min(w, L1Ball::simplex(3));
  CHECK(full.value == doctest::Approx(1.0));
  CHECK(full.dist.prob(1) == doctest::Approx(1.0));

  const auto none = l1_optimistic_min(w, L1Ball{ball.center, 0.0});
  CHECK(none.value == doctest::Approx(ball.center.expectation(w)));

  const std::vector<double> tied{1.0, 1.0, 0.0, 0.0};
  const auto t = l1_optimistic_min(tied, L1Ball{TabularDist::uniform(4), 2.0});
  CHECK(t.dist.prob(2) == doctest::Approx(1.0));
}

TEST_CASE("l1 kernel agrees with the simplex LP on random balls") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t m = 2 + rng.below(7);
    std::vector<double> w(m), b(m);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      w[i] = trial % 3 == 0 ? static_cast<double>(rng.below(3)) : rng.uniform() * 5.0 - 1.0;
      b[i] = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
      sum += b[i];
    }
    if (sum == 0.0) {
      b[0] = 1.0;
      sum = 1.0;
    }
    for (auto& v : b) v /= sum;
    const double r = 2.0 * rng.uniform();
    const L1Ball ball{TabularDist::from_dense(b), r};
    const auto sol = l1_optimistic_min(w, ball);
    CHECK(sol.value == doctest::Approx(l1_min_by_lp(w, b, r)).epsilon(1e-9));
    CHECK(ball.contains(sol.dist, 1e-12));

    const WeightOrder order(w);
    std::vector<TabularDist::Entry> scratch;
    CHECK(l1_optimistic_value(w, order, ball, scratch) == doctest::Approx(sol.value).epsilon(1e-12));
  }
}

TEST_CASE("simplex LP solver handles textbook programs") {
  // min -x - y s.t. x + 2y <= 4, 3x + y <= 6 -> (1.6, 1.2), value -2.8
  LinearProgram lp;
  lp.c = {-1.0, -1.0};
  lp.rows = {{1.0, 2.0}, {3.0, 1.0}};
  lp.sense = {LinearProgram::Sense::le, LinearProgram::Sense::le};
  lp.rhs = {4.0, 6.0};
  const auto sol = solve_lp(lp);
  REQUIRE(sol);
  CHECK(sol->value == doctest::Approx(-2.8));
  CHECK(sol->x[0] == doctest::Approx(1.6));

  LinearProgram infeasible;
  infeasible.c = {1.0};
  infeasible.rows = {{1.0}, {1.0}};
  infeasible.sense = {LinearProgram::Sense::ge, LinearProgram::Sense::le};
  infeasible.rhs = {2.0, 1.0};
  CHECK_FALSE(solve_lp(infeasible));

  LinearProgram unbounded;
  unbounded.c = {-1.0};
  unbounded.rows = {{1.0}};
  unbounded.sense = {LinearProgram::Sense::ge};
  unbounded.rhs = {1.0};
  CHECK_FALSE(solve_lp(unbounded));
}

TEST_CASE("true distribution falls inside the radius ball far more often than 1 - delta") {
  const auto r = check_coverage(500, 77);
  CHECK_MESSAGE(r.passed, r.detail);
}
