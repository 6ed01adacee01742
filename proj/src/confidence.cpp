#include "switching/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace switching {

TransitionCounts::TransitionCounts(std::size_t states, std::size_t actions, std::size_t successors)
    : states_(states),
      actions_(actions),
      successors_(successors),
      n_sa_(states * actions, 0),
      n_sas_(states * actions) {}

void TransitionCounts::record(StateId s, ActionId a, StateId next) {
  if (s >= states_ || a >= actions_ || next >= successors_) throw StructuralError("transition out of range");
  const auto row = middle_index(s, a, actions_);
  ++n_sa_[row];
  ++total_;
  auto& succ = n_sas_[row];
  auto it = std::lower_bound(succ.begin(), succ.end(), next,
                             [](const Successor& e, std::uint32_t i) { return e.first < i; });
  if (it != succ.end() && it->first == next) {
    ++it->second;
  } else {
    succ.insert(it, {next, 1});
  }
}

std::uint64_t TransitionCounts::visits(StateId s, ActionId a, StateId next) const {
  const auto& succ = successor_counts(s, a);
  auto it = std::lower_bound(succ.begin(), succ.end(), next,
                             [](const Successor& e, std::uint32_t i) { return e.first < i; });
  return (it != succ.end() && it->first == next) ? it->second : 0;
}

TabularDist TransitionCounts::empirical(StateId s, ActionId a) const {
  const auto n = visits(s, a);
  if (n == 0) return TabularDist::uniform(successors_);
  const auto& succ = successor_counts(s, a);
  std::vector<TabularDist::Entry> sup;
  sup.reserve(succ.size());
  const double inv = 1.0 / static_cast<double>(n);
  for (const auto& [next, c] : succ) sup.emplace_back(next, static_cast<double>(c) * inv);
  // Re-normalise so the unit-mass invariant holds to rounding.
  double total = 0.0;
  for (const auto& e : sup) total += e.second;
  for (auto& e : sup) e.second /= total;
  return TabularDist(successors_, std::move(sup));
}

nlohmann::json TransitionCounts::to_json() const {
  nlohmann::json triples = nlohmann::json::array();
  for (std::size_t row = 0; row < n_sas_.size(); ++row) {
    const auto [s, a] = middle_decode(row, actions_);
    for (const auto& [next, c] : n_sas_[row]) triples.push_back({s, a, next, c});
  }
  return {{"states", states_}, {"actions", actions_}, {"successors", successors_},
          {"n_sa", n_sa_},     {"n_sas", triples}};
}

TransitionCounts TransitionCounts::from_json(const nlohmann::json& j) {
  TransitionCounts out(j.at("states").get<std::size_t>(), j.at("actions").get<std::size_t>(),
                       j.at("successors").get<std::size_t>());
  for (const auto& t : j.at("n_sas")) {
    const auto s = t.at(0).get<StateId>();
    const auto a = t.at(1).get<ActionId>();
    const auto next = t.at(2).get<StateId>();
    const auto c = t.at(3).get<std::uint64_t>();
    if (s >= out.states_ || a >= out.actions_ || next >= out.successors_ || c == 0) {
      throw StructuralError("corrupt transition snapshot");
    }
    const auto row = middle_index(s, a, out.actions_);
    auto& succ = out.n_sas_[row];
    if (!succ.empty() && succ.back().first >= next) throw StructuralError("corrupt transition snapshot order");
    succ.emplace_back(next, c);
    out.n_sa_[row] += c;
    out.total_ += c;
  }
  if (j.at("n_sa").get<std::vector<std::uint64_t>>() != out.n_sa_) {
    throw StructuralError("transition snapshot marginals are inconsistent");
  }
  return out;
}

AgentCounts::AgentCounts(Dims dims)
    : dims_(dims), n_sd_(dims.states * dims.agents, 0), n_sda_(dims.states * dims.agents * dims.actions, 0) {}

void AgentCounts::record(StateId s, AgentId d, ActionId a) {
  if (s >= dims_.states || d >= dims_.agents || a >= dims_.actions) throw StructuralError("agent step out of range");
  const auto row = augmented_index(s, d, dims_.agents);
  ++n_sd_[row];
  ++n_sda_[row * dims_.actions + a];
  ++total_;
}

TabularDist AgentCounts::empirical(StateId s, AgentId d) const {
  const auto n = visits(s, d);
  if (n == 0) return TabularDist::uniform(dims_.actions);
  std::vector<double> probs(dims_.actions);
  double total = 0.0;
  for (ActionId a = 0; a < dims_.actions; ++a) {
    probs[a] = static_cast<double>(visits(s, d, a)) / static_cast<double>(n);
    total += probs[a];
  }
  for (double& p : probs) p /= total;
  return TabularDist::from_dense(probs);
}

nlohmann::json AgentCounts::to_json() const {
  return {{"states", dims_.states}, {"agents", dims_.agents}, {"actions", dims_.actions},
          {"n_sd", n_sd_},          {"n_sda", n_sda_}};
}

AgentCounts AgentCounts::from_json(const nlohmann::json& j) {
  AgentCounts out(Dims{j.at("states").get<std::size_t>(), j.at("agents").get<std::size_t>(),
                       j.at("actions").get<std::size_t>()});
  auto n_sd = j.at("n_sd").get<std::vector<std::uint64_t>>();
  auto n_sda = j.at("n_sda").get<std::vector<std::uint64_t>>();
  if (n_sd.size() != out.n_sd_.size() || n_sda.size() != out.n_sda_.size()) {
    throw StructuralError("agent snapshot has wrong shape");
  }
  for (std::size_t row = 0; row < n_sd.size(); ++row) {
    std::uint64_t sum = 0;
    for (std::size_t a = 0; a < out.dims_.actions; ++a) sum += n_sda[row * out.dims_.actions + a];
    if (sum != n_sd[row]) throw StructuralError("agent snapshot marginals are inconsistent");
    out.total_ += sum;
  }
  out.n_sd_ = std::move(n_sd);
  out.n_sda_ = std::move(n_sda);
  return out;
}

nlohmann::json CountStore::to_json() const {
  return {{"dims", {dims.states, dims.agents, dims.actions}},
          {"horizon", horizon},
          {"episodes", episodes},
          {"agent", agent.to_json()},
          {"env", env.to_json()}};
}

CountStore CountStore::from_json(const nlohmann::json& j) {
  const auto d = j.at("dims");
  CountStore out(Dims{d.at(0).get<std::size_t>(), d.at(1).get<std::size_t>(), d.at(2).get<std::size_t>()},
                 j.at("horizon").get<std::size_t>());
  out.episodes = j.at("episodes").get<std::uint64_t>();
  out.agent = AgentCounts::from_json(j.at("agent"));
  out.env = TransitionCounts::from_json(j.at("env"));
  if (out.agent.dims() != out.dims || out.env.states() != out.dims.states ||
      out.env.actions() != out.dims.actions || out.env.successors() != out.dims.states) {
    throw StructuralError("count snapshot dimensions disagree");
  }
  return out;
}

void record_step(CountStore& store, StateId s, AgentId d, ActionId a, StateId next) {
  store.agent.record(s, d, a);
  store.env.record(s, a, next);
}

TabularDist empirical_agent_dist(const CountStore& store, StateId s, AgentId d) {
  return store.agent.empirical(s, d);
}

TabularDist empirical_env_dist(const CountStore& store, StateId s, ActionId a) { return store.env.empirical(s, a); }

double l1_radius(double log_term, std::uint64_t n) {
  if (!(log_term > 0.0)) return kSimplexDiameter;
  const double r = std::sqrt(2.0 * log_term / static_cast<double>(std::max<std::uint64_t>(1, n)));
  return std::clamp(r, 0.0, kSimplexDiameter);
}

namespace {

void check_radius_args(double delta, std::uint64_t k) {
  if (!(delta > 0.0 && delta < 1.0)) throw ParameterError("delta must lie in (0, 1)");
  if (k == 0) throw ParameterError("episode index is 1-based");
}

// log((k-1)^7 L^7 a b 2^(m+1) / delta), evaluated in log space.
double union_log_term(std::uint64_t k, std::size_t horizon, double a, double b, std::size_t outcomes, double delta) {
  return 7.0 * std::log(static_cast<double>(k - 1)) + 7.0 * std::log(static_cast<double>(horizon)) + std::log(a) +
         std::log(b) + static_cast<double>(outcomes + 1) * std::numbers::ln2 - std::log(delta);
}

}  // namespace

double beta_agent(std::uint64_t n_sd, double delta, std::uint64_t k, std::size_t horizon, const Dims& dims) {
  check_radius_args(delta, k);
  if (k == 1) return kSimplexDiameter;
  return l1_radius(union_log_term(k, horizon, static_cast<double>(dims.states), static_cast<double>(dims.agents),
                                  dims.actions, delta),
                   n_sd);
}

double beta_agent(const CountStore& store, StateId s, AgentId d, double delta, std::uint64_t k) {
  return beta_agent(store.agent.visits(s, d), delta, k, store.horizon, store.dims);
}

double beta_env(std::uint64_t n_sa, double delta, std::uint64_t k, std::size_t horizon, std::size_t num_states,
                std::size_t num_actions) {
  check_radius_args(delta, k);
  if (k == 1) return kSimplexDiameter;
  return l1_radius(union_log_term(k, horizon, static_cast<double>(num_states), static_cast<double>(num_actions),
                                  num_states, delta),
                   n_sa);
}

double beta_env(const CountStore& store, StateId s, ActionId a, double delta, std::uint64_t k) {
  return beta_env(store.env.visits(s, a), delta, k, store.horizon, store.dims.states, store.dims.actions);
}

double beta_ucrl2(std::uint64_t n, double delta, std::uint64_t k, std::size_t horizon, std::size_t num_states,
                  std::size_t num_actions) {
  check_radius_args(delta, k);
  if (k == 1) return kSimplexDiameter;
  const double log_term = std::log(2.0) + std::log(static_cast<double>(k - 1)) +
                          std::log(static_cast<double>(horizon)) + std::log(static_cast<double>(num_actions)) +
                          std::log(static_cast<double>(num_states)) - std::log(delta);
  if (!(log_term > 0.0)) return kSimplexDiameter;
  const double r = std::sqrt(14.0 * static_cast<double>(num_states) * log_term /
                             static_cast<double>(std::max<std::uint64_t>(1, n)));
  return std::clamp(r, 0.0, kSimplexDiameter);
}

double l1_distance(const TabularDist& a, const TabularDist& b) {
  if (a.universe() != b.universe()) throw StructuralError("distributions over different universes");
  const auto& x = a.support();
  const auto& y = b.support();
  double acc = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() || j < y.size()) {
    if (j == y.size() || (i < x.size() && x[i].first < y[j].first)) {
      acc += x[i++].second;
    } else if (i == x.size() || y[j].first < x[i].first) {
      acc += y[j++].second;
    } else {
      acc += std::abs(x[i++].second - y[j++].second);
    }
  }
  return acc;
}

bool L1Ball::contains(const TabularDist& p, double tol) const {
  if (covers_simplex()) return true;
  return l1_distance(p, center) <= radius + tol;
}

WeightOrder::WeightOrder(std::span<const double> weights) : rank(weights.size()) {
  if (weights.empty()) throw StructuralError("empty weight vector");
  std::vector<std::uint32_t> idx(weights.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
    return weights[a] < weights[b] || (weights[a] == weights[b] && a < b);
  });
  for (std::uint32_t pos = 0; pos < idx.size(); ++pos) rank[idx[pos]] = pos;
  argmin = idx.front();
}

namespace {

// Fills `x` with the minimiser, ordered by ascending (weight, index).
// Sums are accumulated left to right in that order, which reproduces a dense
// sort-then-trim pass over the full outcome set bit for bit (zeros in between
// do not change a floating-point sum).
void optimistic_fill(std::span<const double> weights, const WeightOrder& order, const L1Ball& ball,
                     std::vector<TabularDist::Entry>& x) {
  if (!(ball.radius >= 0.0)) throw ParameterError("radius must be >= 0");
  if (ball.center.universe() != weights.size() || order.rank.size() != weights.size()) {
    throw StructuralError("weights do not match the ball's universe");
  }
  x.clear();
  if (ball.covers_simplex()) {
    x.emplace_back(order.argmin, 1.0);
    return;
  }
  const auto& sup = ball.center.support();
  x.assign(sup.begin(), sup.end());
  if (std::none_of(x.begin(), x.end(), [&](const auto& e) { return e.first == order.argmin; })) {
    x.emplace_back(order.argmin, 0.0);
  }
  std::sort(x.begin(), x.end(),
            [&](const auto& a, const auto& b) { return order.rank[a.first] < order.rank[b.first]; });
  x.front().second = std::min(1.0, x.front().second + ball.radius / 2.0);

  const std::size_t m = x.size();
  // prefix[l] = x_0 + ... + x_{l-1}; entries below the trim cursor never change.
  std::vector<double> prefix(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) prefix[i + 1] = prefix[i] + x[i].second;

  std::size_t l = m - 1;
  // Entries above the cursor that survived trimming with nonzero mass.
  std::vector<std::size_t> tail;
  auto sum_with = [&](std::size_t upto, bool include_upto) {
    double acc = include_upto ? prefix[upto] + x[upto].second : prefix[upto];
    for (std::size_t i = tail.size(); i-- > 0;) acc += x[tail[i]].second;
    return acc;
  };
  while (sum_with(l, true) > 1.0) {
    const double rest = sum_with(l, false);
    x[l].second = std::max(0.0, 1.0 - rest);
    if (x[l].second > 0.0) tail.push_back(l);
    if (l == 0) break;
    --l;
  }
}

double ordered_value(std::span<const double> weights, const std::vector<TabularDist::Entry>& x) {
  double v = 0.0;
  for (const auto& [i, p] : x) v += p * weights[i];
  return v;
}

}  // namespace

OptimisticSolution l1_optimistic_min(std::span<const double> weights, const WeightOrder& order,
                                     const L1Ball& ball) {
  std::vector<TabularDist::Entry> x;
  optimistic_fill(weights, order, ball, x);
  const double value = ordered_value(weights, x);
  std::erase_if(x, [](const auto& e) { return e.second == 0.0; });
  return {TabularDist(weights.size(), std::move(x)), value};
}

OptimisticSolution l1_optimistic_min(std::span<const double> weights, const L1Ball& ball) {
  return l1_optimistic_min(weights, WeightOrder(weights), ball);
}

double l1_optimistic_value(std::span<const double> weights, const WeightOrder& order, const L1Ball& ball,
                           std::vector<TabularDist::Entry>& scratch) {
  if (ball.covers_simplex() && ball.center.universe() == weights.size()) return weights[order.argmin];
  optimistic_fill(weights, order, ball, scratch);
  return ordered_value(weights, scratch);
}

}  // namespace switching
