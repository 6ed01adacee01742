#pragma once

// Three-lane driving benchmark with sensor-based states.
//
// A state is (traffic, current cell, left cell, straight cell, right cell),
// where the side cells read `none` when the car is on an edge lane. Rows
// ahead are drawn i.i.d. per cell from the traffic-dependent cell table, and
// traffic evolves as a Markov chain from row to row. Only the ego car moves.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switching/environment.hpp"
#include "switching/model.hpp"

namespace switching::lane {

enum class Cell : std::uint8_t { road = 0, grass = 1, stone = 2, car = 3, none = 4 };
enum class Traffic : std::uint8_t { no_car = 0, light = 1, heavy = 2 };

inline constexpr ActionId kLeft = 0;
inline constexpr ActionId kStraight = 1;
inline constexpr ActionId kRight = 2;
inline constexpr std::size_t kNumActions = 3;
inline constexpr std::size_t kNumCellTypes = 4;  // excluding `none`
inline constexpr std::size_t kNumTraffic = 3;
/// traffic(3) x current(4) x left(5) x straight(4) x right(5).
inline constexpr std::size_t kNumStates = 3 * 4 * 5 * 4 * 5;

std::string to_string(Cell c);
std::string to_string(Traffic t);
Traffic traffic_from_string(const std::string& s);

struct LaneState {
  Traffic traffic = Traffic::no_car;
  Cell current = Cell::road;
  Cell left = Cell::road;
  Cell straight = Cell::road;
  Cell right = Cell::road;
  int lane = 1;

  bool operator==(const LaneState&) const = default;
};

/// Cell the car enters under `a`; a blocked edge move enters the straight cell.
Cell candidate_cell(const LaneState& s, ActionId a);
int target_lane(int lane, ActionId a);

/// Throws StructuralError on inconsistent lane / edge pattern.
StateId encode(const LaneState& s);
/// Throws StructuralError for indices that do not describe a drivable state
/// (both side cells `none`).
LaneState decode(StateId id);
bool is_valid_state(StateId id);

using Row = std::array<Cell, 3>;

struct LaneConfig {
  /// P(cell | traffic) over (road, grass, stone, car).
  std::array<std::array<double, kNumCellTypes>, kNumTraffic> cell_probs{{
      {0.7, 0.2, 0.1, 0.0},
      {0.6, 0.2, 0.1, 0.1},
      {0.5, 0.2, 0.1, 0.2},
  }};
  /// P(next traffic | traffic).
  std::array<std::array<double, kNumTraffic>, kNumTraffic> traffic_matrix{{
      {0.99, 0.01, 0.00},
      {0.01, 0.98, 0.01},
      {0.00, 0.01, 0.99},
  }};
  /// Environment cost of occupying a cell.
  std::array<double, kNumCellTypes> cell_cost{0.0, 2.0, 4.0, 10.0};
  std::size_t horizon = 10;
  /// Fixed initial traffic; uniform over the three levels when empty.
  std::optional<Traffic> initial_traffic;

  void validate() const;
  nlohmann::json to_json() const;
  static LaneConfig from_json(const nlohmann::json& j);
};

class LaneEnvironment final : public Environment {
 public:
  explicit LaneEnvironment(LaneConfig config = {});

  const LaneConfig& config() const { return config_; }

  std::size_t num_states() const override { return kNumStates; }
  std::size_t num_actions() const override { return kNumActions; }
  StateId reset(Rng& rng) const override { return encode(reset_episode(rng)); }
  StateId step(StateId s, ActionId a, Rng& rng) const override { return encode(env_step(decode(s), a, rng).first); }
  int category(StateId s) const override { return static_cast<int>(s / (kNumStates / kNumTraffic)); }
  std::string category_name(int c) const override { return to_string(static_cast<Traffic>(c)); }

  /// Three cells drawn i.i.d. from the cell table at traffic `gamma`.
  Row sample_row(Traffic gamma, Rng& rng) const;
  Traffic step_traffic(Traffic gamma, Rng& rng) const;
  /// Throws StructuralError for `none`.
  double env_cost(Cell cell) const;

  /// Moves one row forward. Returns the successor and the cost of the
  /// current cell of `s` (the cost is charged for the state being left).
  std::pair<LaneState, double> env_step(const LaneState& s, ActionId a, Rng& rng) const;
  LaneState reset_episode(Rng& rng) const;

  /// Exact p(. | s, a) over encoded states.
  TabularDist true_env_dist(const LaneState& s, ActionId a) const;
  /// Exact distribution of s_1.
  TabularDist initial_distribution() const;
  /// c'(s) for every encoded state.
  std::vector<double> state_costs() const;
  /// p(. | s, a) for every encoded (s, a); invalid states self-loop.
  const std::vector<TabularDist>& env_model() const { return env_model_; }

 private:
  LaneConfig config_;
  std::vector<TabularDist> env_model_;
};

/// Agent whose exact policy is available to evaluation code.
class LaneAgent : public Agent {
 public:
  /// p(. | s); uniform on invalid states.
  virtual TabularDist policy_dist(StateId s) const = 0;
};

struct HumanSpec {
  double sigma = 2.0;
};

/// Picks the action whose entered cell has the lowest noisy cost estimate,
/// with independent N(0, sigma) noise per action (a blocked edge action
/// evaluates the straight cell with its own noise draw).
class HumanAgent final : public LaneAgent {
 public:
  HumanAgent(std::shared_ptr<const LaneEnvironment> env, HumanSpec spec);

  ActionId act(StateId s, Rng& rng) const override;
  std::string name() const override { return "human"; }
  TabularDist policy_dist(StateId s) const override;
  const HumanSpec& spec() const { return spec_; }

 private:
  std::shared_ptr<const LaneEnvironment> env_;
  HumanSpec spec_;
  // Indexed by the three candidate cell types (4^3 combinations).
  std::vector<std::array<double, 3>> table_;
};

/// P(action a has the lowest noisy cost) for candidate costs `costs` and
/// noise scale sigma, by adaptive Gauss-Kronrod quadrature.
std::array<double, 3> human_win_probabilities(const std::array<double, 3>& costs, double sigma);

/// Deterministic policy s -> a.
class MachineAgent final : public LaneAgent {
 public:
  explicit MachineAgent(std::vector<ActionId> table);

  ActionId act(StateId s, Rng&) const override { return table_.at(s); }
  std::string name() const override { return "machine"; }
  TabularDist policy_dist(StateId s) const override { return TabularDist::point(kNumActions, table_.at(s)); }
  const std::vector<ActionId>& table() const { return table_; }

 private:
  std::vector<ActionId> table_;
};

enum class MachineTrainer { q_learning, exact_dp };

/// Tabular Q-learning with epsilon-greedy exploration and step size
/// N(s, a)^(-alpha_exponent).
struct QLearningOptions {
  std::size_t episodes = 50000;
  double alpha_exponent = 0.8;
  double epsilon = 0.1;
  std::uint64_t seed = 1;
};

/// The state with the traffic level read as no-car.
LaneState no_traffic_view(const LaneState& s);

/// Machine policy trained for low traffic. The Q-learning trainer learns
/// from episodes reset at no-car with the traffic chain running, so states
/// it rarely or never visits keep untrained values (ties go to `left`).
/// The exact trainer solves the model with traffic frozen at no-car by
/// backward induction, keeps the first-step greedy action, and acts on
/// every state through no_traffic_view.
MachineAgent train_machine_policy(const LaneEnvironment& env, MachineTrainer trainer = MachineTrainer::q_learning,
                                  const QLearningOptions& q = {});

/// Minimum expected episode cost of any driver with full knowledge of the
/// environment, from the given start distribution.
double optimal_driving_cost(const LaneEnvironment& env, const TabularDist& start);

/// Assembles the exact two-layer model for a team given in agent-id order.
SwitchingModel team_model(const LaneEnvironment& env, const std::vector<std::shared_ptr<const LaneAgent>>& team);

/// JSON strip of one episode for trajectory plots: one row per step with the
/// sensed row ahead in absolute lane order (null where not sensed), the
/// car's lane and current cell, and the controller in charge.
nlohmann::json trajectory_strip(const std::vector<StateId>& states, const std::vector<AgentId>& controllers);

}  // namespace switching::lane
