#include "switching/lane.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace switching::lane {

namespace {

constexpr std::size_t kSideValues = 5;      // four cell types plus none
constexpr std::size_t kStraightValues = 4;  // never none

std::size_t ci(Cell c) { return static_cast<std::size_t>(c); }
std::size_t ti(Traffic t) { return static_cast<std::size_t>(t); }

}  // namespace

std::string to_string(Cell c) {
  switch (c) {
    case Cell::road: return "road";
    case Cell::grass: return "grass";
    case Cell::stone: return "stone";
    case Cell::car: return "car";
    case Cell::none: return "none";
  }
  return "?";
}

std::string to_string(Traffic t) {
  switch (t) {
    case Traffic::no_car: return "no-car";
    case Traffic::light: return "light";
    case Traffic::heavy: return "heavy";
  }
  return "?";
}

Traffic traffic_from_string(const std::string& s) {
  if (s == "no-car") return Traffic::no_car;
  if (s == "light") return Traffic::light;
  if (s == "heavy") return Traffic::heavy;
  throw ParameterError("unknown traffic level: " + s);
}

int target_lane(int lane, ActionId a) { return std::clamp(lane + static_cast<int>(a) - 1, 0, 2); }

Cell candidate_cell(const LaneState& s, ActionId a) {
  if (a == kLeft && s.lane > 0) return s.left;
  if (a == kRight && s.lane < 2) return s.right;
  return s.straight;
}

StateId encode(const LaneState& s) {
  if (s.current == Cell::none || s.straight == Cell::none) throw StructuralError("current and straight cells must be sensed");
  if (s.lane < 0 || s.lane > 2) throw StructuralError("lane out of range");
  if ((s.left == Cell::none) != (s.lane == 0) || (s.right == Cell::none) != (s.lane == 2)) {
    throw StructuralError("edge sensors inconsistent with lane");
  }
  std::size_t idx = ti(s.traffic);
  idx = idx * kNumCellTypes + ci(s.current);
  idx = idx * kSideValues + ci(s.left);
  idx = idx * kStraightValues + ci(s.straight);
  idx = idx * kSideValues + ci(s.right);
  return static_cast<StateId>(idx);
}

LaneState decode(StateId id) {
  if (id >= kNumStates) throw StructuralError("lane state index out of range");
  std::size_t idx = id;
  LaneState s;
  s.right = static_cast<Cell>(idx % kSideValues);
  idx /= kSideValues;
  s.straight = static_cast<Cell>(idx % kStraightValues);
  idx /= kStraightValues;
  s.left = static_cast<Cell>(idx % kSideValues);
  idx /= kSideValues;
  s.current = static_cast<Cell>(idx % kNumCellTypes);
  idx /= kNumCellTypes;
  s.traffic = static_cast<Traffic>(idx);
  if (s.left == Cell::none && s.right == Cell::none) throw StructuralError("no lane has both sides off-road");
  s.lane = s.left == Cell::none ? 0 : (s.right == Cell::none ? 2 : 1);
  return s;
}

bool is_valid_state(StateId id) {
  if (id >= kNumStates) return false;
  return !(id % kSideValues == ci(Cell::none) && (id / (kSideValues * kStraightValues)) % kSideValues == ci(Cell::none));
}

void LaneConfig::validate() const {
  auto check_row = [](auto const& row, const char* what) {
    double total = 0.0;
    for (double p : row) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw ParameterError(std::string(what) + " has a negative entry");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ParameterError(std::string(what) + " row does not sum to 1");
  };
  for (const auto& row : cell_probs) check_row(row, "cell table");
  for (const auto& row : traffic_matrix) check_row(row, "traffic matrix");
  for (double c : cell_cost) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ParameterError("cell costs must be finite and >= 0");
  }
  if (horizon == 0) throw ParameterError("horizon must be positive");
}

nlohmann::json LaneConfig::to_json() const {
  return {{"cell_probs", cell_probs},
          {"traffic_matrix", traffic_matrix},
          {"cell_cost", cell_cost},
          {"horizon", horizon},
          {"initial_traffic", initial_traffic ? to_string(*initial_traffic) : std::string("uniform")}};
}

LaneConfig LaneConfig::from_json(const nlohmann::json& j) {
  LaneConfig c;
  if (j.contains("cell_probs")) c.cell_probs = j.at("cell_probs").get<decltype(c.cell_probs)>();
  if (j.contains("traffic_matrix")) c.traffic_matrix = j.at("traffic_matrix").get<decltype(c.traffic_matrix)>();
  if (j.contains("cell_cost")) c.cell_cost = j.at("cell_cost").get<decltype(c.cell_cost)>();
  if (j.contains("horizon")) c.horizon = j.at("horizon").get<std::size_t>();
  if (j.contains("initial_traffic")) {
    const auto mode = j.at("initial_traffic").get<std::string>();
    if (mode == "uniform") {
      c.initial_traffic.reset();
    } else {
      c.initial_traffic = traffic_from_string(mode);
    }
  }
  c.validate();
  return c;
}

LaneEnvironment::LaneEnvironment(LaneConfig config) : config_(std::move(config)) {
  config_.validate();
  env_model_.reserve(kNumStates * kNumActions);
  for (StateId s = 0; s < kNumStates; ++s) {
    for (ActionId a = 0; a < kNumActions; ++a) {
      env_model_.push_back(is_valid_state(s) ? true_env_dist(decode(s), a) : TabularDist::point(kNumStates, s));
    }
  }
}

Row LaneEnvironment::sample_row(Traffic gamma, Rng& rng) const {
  const auto& probs = config_.cell_probs[ti(gamma)];
  Row row{};
  for (auto& c : row) c = static_cast<Cell>(rng.categorical(probs));
  return row;
}

Traffic LaneEnvironment::step_traffic(Traffic gamma, Rng& rng) const {
  return static_cast<Traffic>(rng.categorical(config_.traffic_matrix[ti(gamma)]));
}

double LaneEnvironment::env_cost(Cell cell) const {
  if (cell == Cell::none) throw StructuralError("an off-road marker has no cost");
  return config_.cell_cost[ci(cell)];
}

std::pair<LaneState, double> LaneEnvironment::env_step(const LaneState& s, ActionId a, Rng& rng) const {
  if (a >= kNumActions) throw StructuralError("action out of range");
  const double cost = env_cost(s.current);
  LaneState next;
  next.lane = target_lane(s.lane, a);
  next.current = candidate_cell(s, a);
  next.traffic = step_traffic(s.traffic, rng);
  const Row row = sample_row(next.traffic, rng);
  next.left = next.lane == 0 ? Cell::none : row[0];
  next.straight = row[1];
  next.right = next.lane == 2 ? Cell::none : row[2];
  return {next, cost};
}

LaneState LaneEnvironment::reset_episode(Rng& rng) const {
  LaneState s;
  s.traffic = config_.initial_traffic ? *config_.initial_traffic
                                      : static_cast<Traffic>(rng.below(kNumTraffic));
  s.lane = 1;
  s.current = Cell::road;
  const Row row = sample_row(s.traffic, rng);
  s.left = row[0];
  s.straight = row[1];
  s.right = row[2];
  return s;
}

namespace {

// Accumulates P(row | traffic) * weight for every sensed row at `lane`.
template <typename Emit>
void enumerate_rows(const LaneConfig& cfg, Traffic gamma, int lane, double weight, Emit&& emit) {
  const auto& probs = cfg.cell_probs[ti(gamma)];
  const std::vector<Cell> all{Cell::road, Cell::grass, Cell::stone, Cell::car};
  const std::vector<Cell> masked{Cell::none};
  const auto& lefts = lane == 0 ? masked : all;
  const auto& rights = lane == 2 ? masked : all;
  for (Cell l : lefts) {
    const double pl = l == Cell::none ? 1.0 : probs[ci(l)];
    if (pl == 0.0) continue;
    for (Cell m : all) {
      const double pm = probs[ci(m)];
      if (pm == 0.0) continue;
      for (Cell r : rights) {
        const double pr = r == Cell::none ? 1.0 : probs[ci(r)];
        if (pr == 0.0) continue;
        emit(l, m, r, weight * pl * pm * pr);
      }
    }
  }
}

TabularDist normalised(std::vector<TabularDist::Entry> entries, std::size_t universe) {
  std::sort(entries.begin(), entries.end());
  double total = 0.0;
  for (const auto& e : entries) total += e.second;
  for (auto& e : entries) e.second /= total;
  return TabularDist(universe, std::move(entries));
}

}  // namespace

TabularDist LaneEnvironment::true_env_dist(const LaneState& s, ActionId a) const {
  if (a >= kNumActions) throw StructuralError("action out of range");
  std::vector<TabularDist::Entry> entries;
  LaneState next;
  next.lane = target_lane(s.lane, a);
  next.current = candidate_cell(s, a);
  for (std::size_t g = 0; g < kNumTraffic; ++g) {
    const double pg = config_.traffic_matrix[ti(s.traffic)][g];
    if (pg == 0.0) continue;
    next.traffic = static_cast<Traffic>(g);
    enumerate_rows(config_, next.traffic, next.lane, pg, [&](Cell l, Cell m, Cell r, double p) {
      next.left = l;
      next.straight = m;
      next.right = r;
      entries.emplace_back(encode(next), p);
    });
  }
  return normalised(std::move(entries), kNumStates);
}

TabularDist LaneEnvironment::initial_distribution() const {
  std::vector<TabularDist::Entry> entries;
  for (std::size_t g = 0; g < kNumTraffic; ++g) {
    double pg = 1.0 / static_cast<double>(kNumTraffic);
    if (config_.initial_traffic) pg = ti(*config_.initial_traffic) == g ? 1.0 : 0.0;
    if (pg == 0.0) continue;
    LaneState s;
    s.traffic = static_cast<Traffic>(g);
    s.lane = 1;
    s.current = Cell::road;
    enumerate_rows(config_, s.traffic, 1, pg, [&](Cell l, Cell m, Cell r, double p) {
      s.left = l;
      s.straight = m;
      s.right = r;
      entries.emplace_back(encode(s), p);
    });
  }
  return normalised(std::move(entries), kNumStates);
}

std::vector<double> LaneEnvironment::state_costs() const {
  std::vector<double> out(kNumStates);
  for (StateId s = 0; s < kNumStates; ++s) {
    const auto current = static_cast<Cell>((s / (kSideValues * kStraightValues * kSideValues)) % kNumCellTypes);
    out[s] = env_cost(current);
  }
  return out;
}

std::array<double, 3> human_win_probabilities(const std::array<double, 3>& costs, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("sigma must be > 0");
  constexpr double kWindow = 8.0;
  std::array<double, 3> out{};
  for (std::size_t a = 0; a < 3; ++a) {
    // Substituting x = c_a + sigma z leaves a standard normal density times
    // the probability that every other estimate exceeds x.
    auto integrand = [&](double z) {
      double v = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
      for (std::size_t b = 0; b < 3; ++b) {
        if (b == a) continue;
        const double shifted = z + (costs[a] - costs[b]) / sigma;
        v *= 0.5 * std::erfc(shifted / std::numbers::sqrt2);
      }
      return v;
    };
    double error = 0.0;
    out[a] = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, -kWindow, kWindow, 30, 1e-12,
                                                                            &error);
  }
  const double total = out[0] + out[1] + out[2];
  for (double& p : out) p /= total;
  return out;
}

HumanAgent::HumanAgent(std::shared_ptr<const LaneEnvironment> env, HumanSpec spec)
    : env_(std::move(env)), spec_(spec), table_(kNumCellTypes * kNumCellTypes * kNumCellTypes) {
  if (!(spec_.sigma > 0.0)) throw ParameterError("human sigma must be > 0");
  for (std::size_t i = 0; i < table_.size(); ++i) {
    const std::array<double, 3> costs{env_->env_cost(static_cast<Cell>(i / 16)),
                                      env_->env_cost(static_cast<Cell>((i / 4) % 4)),
                                      env_->env_cost(static_cast<Cell>(i % 4))};
    table_[i] = human_win_probabilities(costs, spec_.sigma);
  }
}

ActionId HumanAgent::act(StateId s, Rng& rng) const {
  const LaneState st = decode(s);
  ActionId best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (ActionId a = 0; a < kNumActions; ++a) {
    const double estimate = env_->env_cost(candidate_cell(st, a)) + spec_.sigma * rng.normal();
    if (estimate < best_value) {
      best_value = estimate;
      best = a;
    }
  }
  return best;
}

TabularDist HumanAgent::policy_dist(StateId s) const {
  if (!is_valid_state(s)) return TabularDist::uniform(kNumActions);
  const LaneState st = decode(s);
  const std::size_t key = ci(candidate_cell(st, kLeft)) * 16 + ci(candidate_cell(st, kStraight)) * 4 +
                          ci(candidate_cell(st, kRight));
  const auto& p = table_[key];
  return TabularDist::from_dense(std::vector<double>(p.begin(), p.end()));
}

MachineAgent::MachineAgent(std::vector<ActionId> table) : table_(std::move(table)) {
  if (table_.size() != kNumStates) throw StructuralError("machine table must cover every state");
  for (ActionId a : table_) {
    if (a >= kNumActions) throw StructuralError("machine action out of range");
  }
}

LaneState no_traffic_view(const LaneState& s) {
  LaneState out = s;
  out.traffic = Traffic::no_car;
  return out;
}

namespace {

LaneConfig frozen_no_car(const LaneConfig& cfg) {
  LaneConfig frozen = cfg;
  for (std::size_t g = 0; g < kNumTraffic; ++g) {
    for (std::size_t h = 0; h < kNumTraffic; ++h) frozen.traffic_matrix[g][h] = g == h ? 1.0 : 0.0;
  }
  frozen.initial_traffic = Traffic::no_car;
  return frozen;
}

// Backward induction over actions; returns the t = 0 greedy table and
// leaves the t = 0 values in `value`.
std::vector<ActionId> solve_driving(const LaneEnvironment& env, std::vector<double>& value) {
  const std::size_t horizon = env.config().horizon;
  const auto cost = env.state_costs();
  std::vector<double> next(kNumStates, 0.0), cur(kNumStates, 0.0);
  std::vector<ActionId> greedy(kNumStates, kStraight);
  for (std::size_t t = horizon; t-- > 0;) {
    for (StateId s = 0; s < kNumStates; ++s) {
      if (!is_valid_state(s)) continue;
      double best = std::numeric_limits<double>::infinity();
      for (ActionId a = 0; a < kNumActions; ++a) {
        const double v = env.env_model()[middle_index(s, a, kNumActions)].expectation(next);
        if (v < best) {
          best = v;
          greedy[s] = a;
        }
      }
      cur[s] = cost[s] + best;
    }
    std::swap(cur, next);
  }
  value = std::move(next);
  return greedy;
}

std::vector<ActionId> train_exact(const LaneEnvironment& env) {
  const LaneEnvironment frozen(frozen_no_car(env.config()));
  std::vector<double> value;
  const auto trained = solve_driving(frozen, value);
  std::vector<ActionId> table(kNumStates, kStraight);
  for (StateId s = 0; s < kNumStates; ++s) {
    if (is_valid_state(s)) table[s] = trained[encode(no_traffic_view(decode(s)))];
  }
  return table;
}

std::vector<ActionId> train_q_learning(const LaneEnvironment& env, const QLearningOptions& opt) {
  if (!(opt.epsilon >= 0.0 && opt.epsilon <= 1.0) || !(opt.alpha_exponent > 0.0 && opt.alpha_exponent <= 1.0)) {
    throw ParameterError("invalid Q-learning options");
  }
  LaneConfig cfg = env.config();
  cfg.initial_traffic = Traffic::no_car;
  const LaneEnvironment world(cfg);
  const std::size_t horizon = cfg.horizon;
  std::vector<double> q(kNumStates * kNumActions, 0.0);
  std::vector<std::uint64_t> visits(q.size(), 0);
  Rng rng(opt.seed);
  auto greedy = [&](StateId s) {
    ActionId best = 0;
    for (ActionId a = 1; a < kNumActions; ++a) {
      if (q[s * kNumActions + a] < q[s * kNumActions + best]) best = a;
    }
    return best;
  };
  for (std::size_t ep = 0; ep < opt.episodes; ++ep) {
    StateId s = world.reset(rng);
    for (std::size_t t = 0; t < horizon; ++t) {
      const ActionId a = rng.uniform() < opt.epsilon ? static_cast<ActionId>(rng.below(kNumActions)) : greedy(s);
      const StateId next = world.step(s, a, rng);
      // The cost of the entered cell is paid on the following step.
      const bool last = t + 1 == horizon;
      const double target = last ? 0.0 : world.env_cost(decode(next).current) + q[next * kNumActions + greedy(next)];
      const std::size_t cell = s * kNumActions + a;
      const double alpha = std::pow(static_cast<double>(++visits[cell]), -opt.alpha_exponent);
      q[cell] += alpha * (target - q[cell]);
      s = next;
    }
  }
  std::vector<ActionId> table(kNumStates, kStraight);
  for (StateId s = 0; s < kNumStates; ++s) table[s] = greedy(s);
  return table;
}

}  // namespace

MachineAgent train_machine_policy(const LaneEnvironment& env, MachineTrainer trainer, const QLearningOptions& q) {
  return MachineAgent(trainer == MachineTrainer::exact_dp ? train_exact(env) : train_q_learning(env, q));
}

double optimal_driving_cost(const LaneEnvironment& env, const TabularDist& start) {
  if (start.universe() != kNumStates) throw StructuralError("start distribution over wrong universe");
  std::vector<double> value;
  solve_driving(env, value);
  return start.expectation(value);
}

SwitchingModel team_model(const LaneEnvironment& env, const std::vector<std::shared_ptr<const LaneAgent>>& team) {
  SwitchingModel model;
  model.dims = Dims{kNumStates, team.size(), kNumActions};
  model.agent.reserve(kNumStates * team.size());
  for (StateId s = 0; s < kNumStates; ++s) {
    for (const auto& agent : team) model.agent.push_back(agent->policy_dist(s));
  }
  model.env = env.env_model();
  return model;
}

nlohmann::json trajectory_strip(const std::vector<StateId>& states, const std::vector<AgentId>& controllers) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t t = 0; t < states.size(); ++t) {
    const LaneState s = decode(states[t]);
    nlohmann::json cells = nlohmann::json::array({nullptr, nullptr, nullptr});
    if (s.lane > 0) cells[s.lane - 1] = to_string(s.left);
    cells[s.lane] = to_string(s.straight);
    if (s.lane < 2) cells[s.lane + 1] = to_string(s.right);
    nlohmann::json row = {{"t", t + 1},
                          {"traffic", to_string(s.traffic)},
                          {"lane", s.lane},
                          {"current", to_string(s.current)},
                          {"ahead", cells}};
    if (t < controllers.size()) row["controller"] = controllers[t] == kMachine ? "machine" : "human";
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace switching::lane
