#include "switching/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "switching/environment.hpp"
#include "switching/lane.hpp"

namespace switching {

namespace {

constexpr double kPivotEps = 1e-11;

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : cols_(cols), t_(rows, std::vector<double>(cols + 1, 0.0)), basis_(rows) {}

  std::vector<double>& row(std::size_t i) { return t_[i]; }
  std::size_t& basis(std::size_t i) { return basis_[i]; }
  std::size_t rows() const { return t_.size(); }
  double rhs(std::size_t i) const { return t_[i][cols_]; }

  // Minimises cost over the current basis; columns with allowed[j] == false
  // never enter. Returns false when unbounded.
  bool minimise(const std::vector<double>& cost, const std::vector<bool>& allowed) {
    for (;;) {
      std::size_t enter = cols_;
      for (std::size_t j = 0; j < cols_ && enter == cols_; ++j) {
        if (!allowed[j]) continue;
        double r = cost[j];
        for (std::size_t i = 0; i < rows(); ++i) r -= cost[basis_[i]] * t_[i][j];
        if (r < -kPivotEps) enter = j;
      }
      if (enter == cols_) return true;
      std::size_t leave = rows();
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < rows(); ++i) {
        if (t_[i][enter] <= kPivotEps) continue;
        const double ratio = t_[i][cols_] / t_[i][enter];
        if (ratio < best - 1e-14 || (std::abs(ratio - best) <= 1e-14 && basis_[i] < basis_[leave])) {
          best = ratio;
          leave = i;
        }
      }
      if (leave == rows()) return false;
      pivot(leave, enter);
    }
  }

  void pivot(std::size_t r, std::size_t c) {
    const double p = t_[r][c];
    for (double& v : t_[r]) v /= p;
    for (std::size_t i = 0; i < rows(); ++i) {
      if (i == r || t_[i][c] == 0.0) continue;
      const double f = t_[i][c];
      for (std::size_t j = 0; j <= cols_; ++j) t_[i][j] -= f * t_[r][j];
    }
    basis_[r] = c;
  }

  double objective(const std::vector<double>& cost) const {
    double v = 0.0;
    for (std::size_t i = 0; i < rows(); ++i) v += cost[basis_[i]] * t_[i][cols_];
    return v;
  }

 private:
  std::size_t cols_;
  std::vector<std::vector<double>> t_;
  std::vector<std::size_t> basis_;
};

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<double> random_simplex(std::size_t m, Rng& rng, bool sparse) {
  std::vector<double> p(m);
  double sum = 0.0;
  for (auto& v : p) {
    v = (sparse && rng.uniform() < 0.4) ? 0.0 : -std::log(1.0 - rng.uniform());
    sum += v;
  }
  if (sum == 0.0) {
    p[rng.below(m)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= sum;
  return p;
}

ConfidenceSets sets_around(const SwitchingModel& model, const std::vector<double>& agent_r,
                           const std::vector<double>& env_r, const std::vector<TabularDist>* agent_c = nullptr,
                           const std::vector<TabularDist>* env_c = nullptr) {
  ConfidenceSets sets;
  sets.dims = model.dims;
  for (std::size_t i = 0; i < model.agent.size(); ++i) {
    sets.agent.push_back({agent_c ? (*agent_c)[i] : model.agent[i], agent_r[i]});
  }
  for (std::size_t i = 0; i < model.env.size(); ++i) {
    sets.env.push_back({env_c ? (*env_c)[i] : model.env[i], env_r[i]});
  }
  return sets;
}

double enumerate_from(const SwitchingPolicy& policy, const SwitchingModel& model, const CostParams& costs,
                      std::size_t t, StateId s, AgentId d_prev) {
  if (t == policy.horizon()) return 0.0;
  const AgentId d = policy(t, s, d_prev);
  double total = immediate_switch_cost(d, d_prev, costs);
  for (const auto& [a, pa] : model.agent_dist(s, d).support()) {
    if (pa == 0.0) continue;
    double branch = costs.env(s, a);
    for (const auto& [next, pn] : model.env_dist(s, a).support()) {
      if (pn == 0.0) continue;
      branch += pn * enumerate_from(policy, model, costs, t + 1, next, d);
    }
    total += pa * branch;
  }
  return total;
}

}  // namespace

std::optional<LpSolution> solve_lp(const LinearProgram& lp) {
  const std::size_t n = lp.c.size();
  const std::size_t m = lp.rows.size();
  if (lp.sense.size() != m || lp.rhs.size() != m) throw StructuralError("linear program shape mismatch");
  std::size_t slacks = 0, artificials = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (lp.rows[i].size() != n) throw StructuralError("linear program row length mismatch");
    auto sense = lp.sense[i];
    if (lp.rhs[i] < 0.0 && sense != LinearProgram::Sense::eq) {
      sense = sense == LinearProgram::Sense::le ? LinearProgram::Sense::ge : LinearProgram::Sense::le;
    }
    if (sense != LinearProgram::Sense::eq) ++slacks;
    if (sense != LinearProgram::Sense::le) ++artificials;
  }
  const std::size_t cols = n + slacks + artificials;
  Tableau tab(m, cols);
  std::vector<bool> is_artificial(cols, false);
  std::size_t next_slack = n, next_art = n + slacks;
  for (std::size_t i = 0; i < m; ++i) {
    const double flip = lp.rhs[i] < 0.0 ? -1.0 : 1.0;
    auto sense = lp.sense[i];
    if (flip < 0.0 && sense != LinearProgram::Sense::eq) {
      sense = sense == LinearProgram::Sense::le ? LinearProgram::Sense::ge : LinearProgram::Sense::le;
    }
    auto& r = tab.row(i);
    for (std::size_t j = 0; j < n; ++j) r[j] = flip * lp.rows[i][j];
    r[cols] = flip * lp.rhs[i];
    if (sense == LinearProgram::Sense::le) {
      r[next_slack] = 1.0;
      tab.basis(i) = next_slack++;
    } else {
      if (sense == LinearProgram::Sense::ge) r[next_slack++] = -1.0;
      r[next_art] = 1.0;
      is_artificial[next_art] = true;
      tab.basis(i) = next_art++;
    }
  }

  std::vector<bool> all(cols, true);
  std::vector<double> phase1(cols, 0.0);
  for (std::size_t j = 0; j < cols; ++j) phase1[j] = is_artificial[j] ? 1.0 : 0.0;
  if (!tab.minimise(phase1, all)) return std::nullopt;
  if (tab.objective(phase1) > 1e-9) return std::nullopt;
  for (std::size_t i = 0; i < m; ++i) {
    if (!is_artificial[tab.basis(i)]) continue;
    for (std::size_t j = 0; j < cols; ++j) {
      if (!is_artificial[j] && std::abs(tab.row(i)[j]) > kPivotEps) {
        tab.pivot(i, j);
        break;
      }
    }
  }

  std::vector<bool> allowed(cols);
  std::vector<double> cost(cols, 0.0);
  for (std::size_t j = 0; j < cols; ++j) allowed[j] = !is_artificial[j];
  for (std::size_t j = 0; j < n; ++j) cost[j] = lp.c[j];
  if (!tab.minimise(cost, allowed)) return std::nullopt;

  LpSolution sol;
  sol.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (tab.basis(i) < n) sol.x[tab.basis(i)] = tab.rhs(i);
  }
  for (std::size_t j = 0; j < n; ++j) sol.value += lp.c[j] * sol.x[j];
  return sol;
}

double l1_min_by_lp(const std::vector<double>& weights, const std::vector<double>& center, double radius) {
  const std::size_t m = weights.size();
  if (center.size() != m) throw StructuralError("centre and weights differ in length");
  LinearProgram lp;
  lp.c.assign(2 * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) lp.c[i] = weights[i];
  auto add = [&](std::vector<double> row, LinearProgram::Sense s, double rhs) {
    lp.rows.push_back(std::move(row));
    lp.sense.push_back(s);
    lp.rhs.push_back(rhs);
  };
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> hi(2 * m, 0.0), lo(2 * m, 0.0);
    hi[i] = 1.0;
    hi[m + i] = -1.0;
    lo[i] = 1.0;
    lo[m + i] = 1.0;
    add(hi, LinearProgram::Sense::le, center[i]);
    add(lo, LinearProgram::Sense::ge, center[i]);
  }
  std::vector<double> budget(2 * m, 0.0), mass(2 * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    budget[m + i] = 1.0;
    mass[i] = 1.0;
  }
  add(budget, LinearProgram::Sense::le, radius);
  add(mass, LinearProgram::Sense::eq, 1.0);
  const auto sol = solve_lp(lp);
  if (!sol) throw std::runtime_error("L1 ball LP infeasible");
  return sol->value;
}

double enumerate_policy_value(const SwitchingPolicy& policy, const SwitchingModel& model, const CostParams& costs,
                              StateId s, AgentId d0) {
  return enumerate_from(policy, model, costs, 0, s, d0);
}

CheckResult check_l1_kernel(std::size_t trials, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  double worst = 0.0, worst_violation = 0.0;
  bool exact = true;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::size_t m = 1 + rng.below(6);
    std::vector<double> w(m);
    const bool ties = trial % 4 == 0;
    for (auto& v : w) v = ties ? static_cast<double>(rng.below(3)) : 10.0 * rng.uniform();
    const auto b = random_simplex(m, rng, trial % 3 == 0);
    double r = 2.2 * rng.uniform();
    if (trial % 10 == 1) r = 0.0;
    const L1Ball ball{TabularDist::from_dense(b), r};
    const auto got = l1_optimistic_min(w, ball);
    const double oracle = l1_min_by_lp(w, b, std::min(r, 2.0));
    worst = std::max(worst, std::abs(got.value - oracle));

    const auto x = got.dist.dense();
    double mass = 0.0, dist = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (x[i] < 0.0) exact = false;
      mass += x[i];
      dist += std::abs(x[i] - b[i]);
    }
    worst_violation = std::max({worst_violation, std::abs(mass - 1.0), dist - r});
    if (std::abs(got.dist.expectation(w) - got.value) > 1e-12) exact = false;
  }
  const double secs = elapsed(start);
  CheckResult out{"l1-kernel-vs-lp", worst <= 1e-6 && exact && worst_violation <= 1e-12 && secs < 10.0,
                  fmt("trials=%.0f max|kernel-lp|=%.3g max violation=%.3g", static_cast<double>(trials), worst,
                      worst_violation),
                  secs};
  return out;
}

CheckResult check_dp_enumeration(std::size_t instances, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  const Dims dims{2, 2, 2};
  const std::size_t L = 2;
  const std::size_t cells = L * dims.states * dims.agents;
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const auto inst = random_instance(dims, L, rng);
    const auto plan = exact_backward_dp(inst.model, inst.costs, L);
    std::vector<double> best(dims.states * dims.agents, std::numeric_limits<double>::infinity());
    for (std::uint32_t bits = 0; bits < (1u << cells); ++bits) {
      SwitchingPolicy pi(L, dims.states, dims.agents);
      for (std::size_t c = 0; c < cells; ++c) pi.table()[c] = (bits >> c) & 1u;
      for (StateId s = 0; s < dims.states; ++s) {
        for (AgentId d0 = 0; d0 < dims.agents; ++d0) {
          auto& b = best[augmented_index(s, d0, dims.agents)];
          b = std::min(b, enumerate_policy_value(pi, inst.model, inst.costs, s, d0));
        }
      }
    }
    for (StateId s = 0; s < dims.states; ++s) {
      for (AgentId d0 = 0; d0 < dims.agents; ++d0) {
        worst = std::max(worst, std::abs(plan.values(0, s, d0) - best[augmented_index(s, d0, dims.agents)]));
      }
    }
  }
  const double secs = elapsed(start);
  return {"dp-vs-256-policies", worst <= 1e-9 && secs < 30.0,
          fmt("instances=%.0f max|dp-enum|=%.3g", static_cast<double>(instances), worst), secs};
}

CheckResult check_zero_radius(std::size_t instances, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    const Dims dims{2 + rng.below(4), 2 + rng.below(2), 2 + rng.below(3)};
    const std::size_t L = 2 + rng.below(5);
    const auto inst = random_instance(dims, L, rng);
    const auto exact = exact_backward_dp(inst.model, inst.costs, L);
    const std::vector<double> za(inst.model.agent.size(), 0.0), ze(inst.model.env.size(), 0.0);
    const auto opt = optimistic_backward_dp(sets_around(inst.model, za, ze), inst.costs, L);
    for (std::size_t k = 0; k < exact.values.table().size(); ++k) {
      worst = std::max(worst, std::abs(exact.values.table()[k] - opt.values.table()[k]));
    }
  }
  return {"zero-radius-collapse", worst <= 1e-9,
          fmt("instances=%.0f max|optimistic-exact|=%.3g", static_cast<double>(instances), worst), elapsed(start)};
}

CheckResult check_optimism(std::size_t instances, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t trials = 0;
  auto perturb = [&](const TabularDist& truth, double& radius) {
    const auto t = truth.dense();
    const auto q = random_simplex(t.size(), rng, rng.uniform() < 0.3);
    const double lam = rng.uniform();
    std::vector<double> c(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) c[i] = (1.0 - lam) * t[i] + lam * q[i];
    auto centre = TabularDist::from_dense(c);
    radius = std::min(2.0, l1_distance(centre, truth) + 1e-12 + 0.5 * rng.uniform() * rng.uniform());
    return centre;
  };
  for (std::size_t i = 0; i < instances; ++i) {
    const Dims dims{2 + rng.below(4), 2 + rng.below(2), 2 + rng.below(3)};
    const std::size_t L = 2 + rng.below(5);
    const auto inst = random_instance(dims, L, rng);
    const auto exact = exact_backward_dp(inst.model, inst.costs, L);
    for (int rep = 0; rep < 5; ++rep, ++trials) {
      std::vector<TabularDist> ac, ec;
      std::vector<double> ar, er;
      for (const auto& d : inst.model.agent) {
        double r = 0.0;
        ac.push_back(perturb(d, r));
        ar.push_back(r);
      }
      for (const auto& d : inst.model.env) {
        double r = 0.0;
        ec.push_back(perturb(d, r));
        er.push_back(r);
      }
      const auto opt = optimistic_backward_dp(sets_around(inst.model, ar, er, &ac, &ec), inst.costs, L);
      for (std::size_t k = 0; k < exact.values.table().size(); ++k) {
        worst = std::max(worst, opt.values.table()[k] - exact.values.table()[k]);
      }
    }
  }
  return {"optimism", worst <= 1e-9,
          fmt("instances=%.0f radius draws=%.0f max(v_opt - v*)=%.3g", static_cast<double>(instances),
              static_cast<double>(trials), worst),
          elapsed(start)};
}

CheckResult check_coverage(std::size_t trials, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  const double delta = 0.1;
  const std::size_t L = 10;
  const Dims dims{6, 2, 3};
  std::size_t env_in = 0, agent_in = 0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    const auto p_env = random_simplex(dims.states, rng, trial % 2 == 0);
    const auto p_agent = random_simplex(dims.actions, rng, trial % 2 == 1);
    const std::uint64_t n = 1 + rng.below(400);
    const std::uint64_t k = 2 + rng.below(100);
    std::vector<double> ce(dims.states, 0.0), ca(dims.actions, 0.0);
    for (std::uint64_t j = 0; j < n; ++j) {
      ce[rng.categorical(p_env)] += 1.0;
      ca[rng.categorical(p_agent)] += 1.0;
    }
    for (auto& v : ce) v /= static_cast<double>(n);
    for (auto& v : ca) v /= static_cast<double>(n);
    const L1Ball env_ball{TabularDist::from_dense(ce), beta_env(n, delta, k, L, dims.states, dims.actions)};
    const L1Ball agent_ball{TabularDist::from_dense(ca), beta_agent(n, delta, k, L, dims)};
    if (env_ball.contains(TabularDist::from_dense(p_env), 1e-12)) ++env_in;
    if (agent_ball.contains(TabularDist::from_dense(p_agent), 1e-12)) ++agent_in;
  }
  const double fe = static_cast<double>(env_in) / static_cast<double>(trials);
  const double fa = static_cast<double>(agent_in) / static_cast<double>(trials);
  const double secs = elapsed(start);
  return {"confidence-coverage", fe >= 0.9 && fa >= 0.9 && secs < 60.0,
          fmt("coverage env=%.4f agent=%.4f trials=%.0f", fe, fa, static_cast<double>(trials)), secs};
}

SampleAgreement sample_agreement(const std::vector<double>& probs, const std::vector<std::uint64_t>& counts) {
  if (probs.size() != counts.size()) throw StructuralError("probabilities and counts differ in length");
  std::uint64_t n = 0;
  for (auto c : counts) n += c;
  SampleAgreement out;
  double chi2 = 0.0;
  std::size_t df = 0;
  const double nn = static_cast<double>(n);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    const double c = static_cast<double>(counts[i]);
    if (p <= 0.0) {
      if (counts[i] > 0) out.impossible_seen = true;
      continue;
    }
    ++df;
    chi2 += (c - nn * p) * (c - nn * p) / (nn * p);
    if (p < 1.0) out.max_abs_z = std::max(out.max_abs_z, std::abs(c / nn - p) / std::sqrt(p * (1.0 - p) / nn));
  }
  if (df > 1) {
    const double p = boost::math::gamma_q(0.5 * static_cast<double>(df - 1), 0.5 * chi2);
    out.chi2_z = p <= 0.0 ? std::numeric_limits<double>::infinity()
                          : boost::math::quantile(boost::math::complement(boost::math::normal(), p));
  }
  return out;
}

namespace {

StateId random_lane_state(Rng& rng) {
  for (;;) {
    const auto s = static_cast<StateId>(rng.below(lane::kNumStates));
    if (lane::is_valid_state(s)) return s;
  }
}

CheckResult summarise_agreement(const std::string& name, const std::vector<SampleAgreement>& all,
                                std::size_t samples, double secs) {
  double worst_chi = -std::numeric_limits<double>::infinity(), worst_z = 0.0;
  bool impossible = false;
  for (const auto& a : all) {
    worst_chi = std::max(worst_chi, a.chi2_z);
    worst_z = std::max(worst_z, a.max_abs_z);
    impossible = impossible || a.impossible_seen;
  }
  char buf[256];
  std::snprintf(buf, sizeof buf, "inputs=%zu samples=%zu max chi2 z=%.3f max outcome |z|=%.3f impossible=%s",
                all.size(), samples, worst_chi, worst_z, impossible ? "yes" : "no");
  return {name, worst_chi <= 3.0 && !impossible, buf, secs};
}

}  // namespace

CheckResult check_human_sampler(std::size_t inputs, std::size_t samples, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  const auto env = std::make_shared<const lane::LaneEnvironment>();
  std::vector<SampleAgreement> all;
  for (std::size_t i = 0; i < inputs; ++i) {
    const StateId s = random_lane_state(rng);
    const double sigma = 0.2 + 3.8 * rng.uniform();
    const lane::HumanAgent human(env, {sigma});
    Rng draws = rng.split(i);
    std::vector<std::uint64_t> counts(lane::kNumActions, 0);
    for (std::size_t j = 0; j < samples; ++j) ++counts[human.act(s, draws)];
    all.push_back(sample_agreement(human.policy_dist(s).dense(), counts));
  }
  return summarise_agreement("human-sampler", all, samples, elapsed(start));
}

CheckResult check_env_sampler(std::size_t inputs, std::size_t samples, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  const lane::LaneEnvironment env;
  std::vector<SampleAgreement> all;
  for (std::size_t i = 0; i < inputs; ++i) {
    const StateId s = random_lane_state(rng);
    const auto a = static_cast<ActionId>(rng.below(lane::kNumActions));
    Rng draws = rng.split(i);
    std::vector<std::uint64_t> counts(lane::kNumStates, 0);
    for (std::size_t j = 0; j < samples; ++j) ++counts[env.step(s, a, draws)];
    all.push_back(sample_agreement(env.true_env_dist(lane::decode(s), a).dense(), counts));
  }
  return summarise_agreement("env-sampler", all, samples, elapsed(start));
}

}  // namespace switching
