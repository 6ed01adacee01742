#include "switching/regret.hpp"

#include <cinttypes>
#include <limits>

namespace switching {

void RegretCurve::push(double d) {
  delta.push_back(d);
  cumulative.push_back(total() + d);
}

RegretOracle::RegretOracle(SwitchingModel model, CostParams costs, InitialCondition init, std::size_t horizon)
    : model_(std::move(model)),
      costs_(std::move(costs)),
      init_(std::move(init)),
      optimal_(exact_backward_dp(model_, costs_, horizon)),
      optimal_value_(optimal_.values.expected_start(init_)) {
  if (init_.state.universe() != model_.dims.states) throw StructuralError("start distribution over wrong universe");
}

double RegretOracle::expected_cost(const SwitchingPolicy& policy) const {
  if (policy.states() != model_.dims.states || policy.agents() != model_.dims.agents ||
      policy.horizon() != optimal_.policy.horizon()) {
    throw StructuralError("policy index space does not match the model");
  }
  return evaluate_policy(policy, model_, costs_).expected_start(init_);
}

double RegretOracle::regret(const SwitchingPolicy& policy) const { return expected_cost(policy) - optimal_value_; }

double episode_regret(const SwitchingPolicy& policy, const SwitchingModel& model, const CostParams& costs,
                      const InitialCondition& init) {
  return RegretOracle(model, costs, init, policy.horizon()).regret(policy);
}

RegretCurve multi_team_regret(const std::vector<RegretCurve>& teams) {
  RegretCurve out;
  if (teams.empty()) return out;
  out.horizon = teams.front().horizon;
  const std::size_t k = teams.front().episodes();
  for (const auto& c : teams) {
    if (c.episodes() != k) throw StructuralError("team curves differ in length");
  }
  for (std::size_t i = 0; i < k; ++i) {
    double sum = 0.0;
    for (const auto& c : teams) sum += c.delta[i];
    out.push(sum);
  }
  return out;
}

double sublinearity_score(const RegretCurve& curve) {
  const std::size_t k = curve.episodes();
  if (k < 4) throw ParameterError("sublinearity needs at least 4 episodes");
  const double half = curve.at(k / 2);
  const double rest = curve.at(k) - half;
  if (half == 0.0) return rest == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return rest / half;
}

void ControlStats::merge(const ControlStats& other) {
  steps += other.steps;
  human_steps += other.human_steps;
  switches += other.switches;
  if (steps_by_category.size() < other.steps_by_category.size()) {
    steps_by_category.resize(other.steps_by_category.size(), 0);
    human_by_category.resize(other.human_by_category.size(), 0);
  }
  for (std::size_t c = 0; c < other.steps_by_category.size(); ++c) {
    steps_by_category[c] += other.steps_by_category[c];
    human_by_category[c] += other.human_by_category[c];
  }
}

nlohmann::json ControlStats::to_json() const {
  return {{"steps", steps},
          {"human_steps", human_steps},
          {"switches", switches},
          {"steps_by_category", steps_by_category},
          {"human_by_category", human_by_category}};
}

ControlStats ControlStats::from_json(const nlohmann::json& j) {
  ControlStats out;
  out.steps = j.at("steps").get<std::size_t>();
  out.human_steps = j.at("human_steps").get<std::size_t>();
  out.switches = j.at("switches").get<std::size_t>();
  out.steps_by_category = j.at("steps_by_category").get<std::vector<std::size_t>>();
  out.human_by_category = j.at("human_by_category").get<std::vector<std::size_t>>();
  if (out.steps_by_category.size() != out.human_by_category.size()) {
    throw StructuralError("control stats category arrays differ in length");
  }
  return out;
}

ControlStats control_stats(const EpisodeLog& log, const Environment& env, std::size_t categories) {
  ControlStats out;
  out.steps_by_category.assign(categories, 0);
  out.human_by_category.assign(categories, 0);
  AgentId prev = log.d0;
  for (const auto& step : log.steps) {
    const int c = env.category(step.s);
    if (c < 0 || static_cast<std::size_t>(c) >= categories) throw StructuralError("state category out of range");
    const bool human = step.d != kMachine;
    ++out.steps;
    ++out.steps_by_category[c];
    if (human) {
      ++out.human_steps;
      ++out.human_by_category[c];
    }
    if (step.d != prev) ++out.switches;
    prev = step.d;
  }
  return out;
}

void RegretCsvWriter::header() const { std::fprintf(out_, "%s\n", kHeader); }

void RegretCsvWriter::row(std::size_t team, std::uint64_t k, std::size_t horizon, double delta_k, double cum_regret,
                          const ControlStats& stats, const std::string& gamma0) const {
  std::fprintf(out_, "%zu,%" PRIu64 ",%" PRIu64 ",%.12g,%.12g,%.6g,%zu,%s\n", team, k,
               static_cast<std::uint64_t>(k * horizon), delta_k, cum_regret, stats.human_fraction(), stats.switches,
               gamma0.c_str());
}

}  // namespace switching
