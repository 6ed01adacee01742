#include "switching/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>

#include "switching/lane.hpp"
#include "switching/learner.hpp"
#include "switching/regret.hpp"

namespace switching {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::fig2: return "fig2";
    case ExperimentKind::fig3: return "fig3";
    case ExperimentKind::fig4: return "fig4";
    case ExperimentKind::fig5: return "fig5";
    case ExperimentKind::tiny_validate: return "tiny-validate";
  }
  return "unknown";
}

ExperimentKind experiment_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::fig2, ExperimentKind::fig3, ExperimentKind::fig4, ExperimentKind::fig5,
                 ExperimentKind::tiny_validate}) {
    if (to_string(k) == s) return k;
  }
  throw ParameterError("unknown experiment '" + s + "'");
}

namespace {

const std::vector<std::string> kLearners{"ucrl2mc", "ucrl2", "machine", "human", "optimal"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto t = trim(v);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || !std::isfinite(out)) {
    throw ParameterError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto t = trim(v);
  const auto res = std::from_chars(t.data(), t.data() + t.size(), out);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw ParameterError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const auto t = trim(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ParameterError(key + ": expected a boolean, got '" + v + "'");
}

std::string fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::size_t learner_stream(const std::string& name) {
  return static_cast<std::size_t>(std::find(kLearners.begin(), kLearners.end(), name) - kLearners.begin());
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParameterError("corrupt " + path.string() + ": " + e.what());
  }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(s)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_uint("seeds", item));
      continue;
    }
    const auto lo = parse_uint("seeds", item.substr(0, dots));
    const auto hi = parse_uint("seeds", item.substr(dots + 2));
    if (hi < lo) throw ParameterError("seeds: empty range '" + item + "'");
    if (hi - lo >= 100000) throw ParameterError("seeds: range too long '" + item + "'");
    for (auto v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw ParameterError("seeds: empty list");
  return out;
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  switch (kind) {
    case ExperimentKind::fig2:
      c.learners = {"machine", "human"};
      break;
    case ExperimentKind::fig3:
      c.K = 4000;
      c.cx = 0.2;
      c.cch = 0.1;
      c.learners = {"ucrl2mc"};
      break;
    case ExperimentKind::fig4:
      break;
    case ExperimentKind::fig5:
      c.K = 5000;
      c.sigma.clear();
      c.learners = {"ucrl2mc", "ucrl2"};
      break;
    case ExperimentKind::tiny_validate:
      c.env = "tiny";
      c.learners.clear();
      break;
  }
  return c;
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& m) { throw ParameterError(m); };
  if (env != "lane" && env != "tiny") fail("env must be lane or tiny");
  if (experiment == ExperimentKind::fig2 && env != "lane") fail("fig2 needs the lane environment");
  if (experiment == ExperimentKind::fig3 && env != "lane") fail("fig3 needs the lane environment");
  if (K < 1 || K > 100000000) fail("K must lie in [1, 1e8]");
  if (L < 1 || L > 1000) fail("L must lie in [1, 1000]");
  if (N < 1 || N > 1000) fail("N must lie in [1, 1000]");
  if (!(delta > 0.0 && delta < 1.0)) fail("delta must lie in (0, 1)");
  for (double s : sigma) {
    if (!(s > 0.0)) fail("sigma values must be positive");
  }
  if (sigma.empty() && experiment != ExperimentKind::fig5 && experiment != ExperimentKind::tiny_validate &&
      env == "lane") {
    fail("sigma must list at least one value");
  }
  if (experiment == ExperimentKind::fig5 && !sigma.empty() && sigma.size() != N) {
    fail("fig5 takes either no sigma (drawn from U(0, 4)) or exactly N values");
  }
  if (!(cx >= 0.0) || !(cch >= 0.0)) fail("cx and cch must be non-negative");
  if (gamma0 != "uniform" && gamma0 != "no-car" && gamma0 != "light" && gamma0 != "heavy") {
    fail("gamma0 must be uniform, no-car, light or heavy");
  }
  if (seeds.empty()) fail("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) fail("seeds must be distinct");
  if (learners.empty() && experiment != ExperimentKind::tiny_validate) fail("at least one learner is required");
  std::set<std::string> seen;
  for (const auto& l : learners) {
    if (learner_stream(l) == kLearners.size()) fail("unknown learner '" + l + "'");
    if (!seen.insert(l).second) fail("learner '" + l + "' listed twice");
    if (experiment == ExperimentKind::fig2 && l != "machine" && l != "human") {
      fail("fig2 compares the machine and human drivers only");
    }
  }
  if (machine_trainer != "q-learning" && machine_trainer != "exact-dp") {
    fail("machine_trainer must be q-learning or exact-dp");
  }
  if (q_episodes < 1) fail("q_episodes must be positive");
  if (!(radius_scale > 0.0)) fail("radius_scale must be positive");
  if (checkpoint_every < 1) fail("checkpoint_every must be positive");
}

json ExperimentConfig::to_json() const {
  return {{"experiment", to_string(experiment)},
          {"env", env},
          {"K", K},
          {"L", L},
          {"N", N},
          {"delta", delta},
          {"sigma", sigma},
          {"cx", cx},
          {"cch", cch},
          {"gamma0", gamma0},
          {"seeds", seeds},
          {"learners", learners},
          {"share_env", share_env},
          {"machine_trainer", machine_trainer},
          {"q_episodes", q_episodes},
          {"q_seed", q_seed},
          {"radius_scale", radius_scale},
          {"known_cost", known_cost},
          {"checkpoint_every", checkpoint_every},
          {"strip_episodes", strip_episodes}};
}

void ExperimentConfig::apply_json(const json& j) {
  if (!j.is_object()) throw ParameterError("configuration must be a JSON object");
  auto text = [](const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_array()) {
      std::string out;
      for (const auto& e : v) {
        if (!out.empty()) out += ',';
        out += e.is_string() ? e.get<std::string>() : e.dump();
      }
      return out;
    }
    return v.dump();
  };
  // The experiment kind goes first so that its defaults never clobber other keys.
  if (j.contains("experiment")) set("experiment", text(j.at("experiment")));
  for (const auto& [key, value] : j.items()) {
    if (key != "experiment") set(key, text(value));
  }
}

void ExperimentConfig::apply_text(const std::string& text) {
  const auto t = trim(text);
  if (!t.empty() && t.front() == '{') {
    json j;
    try {
      j = json::parse(t);
    } catch (const json::exception& e) {
      throw ParameterError(std::string("malformed JSON configuration: ") + e.what());
    }
    apply_json(j);
    return;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::pair<std::string, std::string>> entries;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.resize(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParameterError("line " + std::to_string(lineno) + ": expected key = value");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  for (const auto& [k, v] : entries) {
    if (k == "experiment") set(k, v);
  }
  for (const auto& [k, v] : entries) {
    if (k != "experiment") set(k, v);
  }
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  if (key == "experiment") {
    const auto kind = experiment_from_string(trim(value));
    if (kind != experiment) {
      const auto keep_seeds = seeds;
      *this = defaults(kind);
      seeds = keep_seeds;
    }
  } else if (key == "env") {
    env = trim(value);
  } else if (key == "K") {
    K = parse_uint(key, value);
  } else if (key == "L") {
    L = parse_uint(key, value);
  } else if (key == "N") {
    N = parse_uint(key, value);
  } else if (key == "delta") {
    delta = parse_double(key, value);
  } else if (key == "sigma") {
    sigma.clear();
    for (const auto& s : split_list(value)) sigma.push_back(parse_double(key, s));
  } else if (key == "cx") {
    cx = parse_double(key, value);
  } else if (key == "cch") {
    cch = parse_double(key, value);
  } else if (key == "gamma0") {
    gamma0 = trim(value);
  } else if (key == "seeds" || key == "seed") {
    seeds = parse_seed_list(value);
  } else if (key == "learners") {
    learners = split_list(value);
  } else if (key == "share_env") {
    share_env = parse_bool(key, value);
  } else if (key == "machine_trainer") {
    machine_trainer = trim(value);
  } else if (key == "q_episodes") {
    q_episodes = parse_uint(key, value);
  } else if (key == "q_seed") {
    q_seed = parse_uint(key, value);
  } else if (key == "radius_scale") {
    radius_scale = parse_double(key, value);
  } else if (key == "known_cost") {
    known_cost = parse_bool(key, value);
  } else if (key == "checkpoint_every") {
    checkpoint_every = parse_uint(key, value);
  } else if (key == "strip_episodes") {
    strip_episodes.clear();
    for (const auto& s : split_list(value)) strip_episodes.push_back(parse_uint(key, s));
  } else {
    throw ParameterError("unknown configuration key '" + key + "'");
  }
}

std::string ExperimentConfig::hash() const { return fnv1a(to_json().dump()); }

namespace {

// One team's fixed ingredients for a seed.
struct World {
  std::shared_ptr<const Environment> env;
  std::vector<AgentPtr> agents;
  CostParams costs;
  std::shared_ptr<const RegretOracle> oracle;
  double sigma = 0.0;
};

class Context {
 public:
  explicit Context(ExperimentConfig config) : config_(std::move(config)) {
    if (config_.env == "lane") {
      lane::LaneConfig lc;
      lc.horizon = config_.L;
      if (config_.gamma0 != "uniform") lc.initial_traffic = lane::traffic_from_string(config_.gamma0);
      lane_ = std::make_shared<const lane::LaneEnvironment>(lc);
      lane::QLearningOptions q;
      q.episodes = config_.q_episodes;
      q.seed = config_.q_seed;
      const auto trainer =
          config_.machine_trainer == "exact-dp" ? lane::MachineTrainer::exact_dp : lane::MachineTrainer::q_learning;
      machine_ = std::make_shared<const lane::MachineAgent>(lane::train_machine_policy(*lane_, trainer, q));
    } else {
      tiny_ = tiny_instance();
      tiny_env_ = tiny_.environment();
    }
  }

  const ExperimentConfig& config() const { return config_; }
  std::size_t horizon() const { return lane_ ? config_.L : tiny_.horizon; }
  std::size_t categories() const { return lane_ ? lane::kNumTraffic : 1; }
  bool is_lane() const { return lane_ != nullptr; }
  const std::shared_ptr<const lane::LaneEnvironment>& lane_env() const { return lane_; }
  const std::shared_ptr<const lane::MachineAgent>& machine() const { return machine_; }

  World world(double sigma) const {
    if (!lane_) {
      auto it = cache_.find(-1.0);
      if (it != cache_.end()) return it->second;
      World w{tiny_env_, tiny_.agents(), tiny_.costs, nullptr, 0.0};
      w.oracle = std::make_shared<const RegretOracle>(tiny_.model, tiny_.costs, tiny_.init, tiny_.horizon);
      return cache_.emplace(-1.0, w).first->second;
    }
    auto it = cache_.find(sigma);
    if (it != cache_.end()) return it->second;
    auto human = std::make_shared<const lane::HumanAgent>(lane_, lane::HumanSpec{sigma});
    const std::vector<std::shared_ptr<const lane::LaneAgent>> team{machine_, human};
    auto model = lane::team_model(*lane_, team);
    const auto state_cost = lane_->state_costs();
    auto costs = CostParams::from_state_costs(model.dims, state_cost, config_.cch, config_.cx);
    World w{lane_, {machine_, human}, costs, nullptr, sigma};
    w.oracle = std::make_shared<const RegretOracle>(std::move(model), costs,
                                                    InitialCondition{lane_->initial_distribution(), kMachine},
                                                    config_.L);
    return cache_.emplace(sigma, w).first->second;
  }

 private:
  ExperimentConfig config_;
  std::shared_ptr<const lane::LaneEnvironment> lane_;
  std::shared_ptr<const lane::MachineAgent> machine_;
  TabularInstance tiny_;
  std::shared_ptr<Environment> tiny_env_;
  mutable std::map<double, World> cache_;
};

std::vector<double> team_sigmas(const ExperimentConfig& c, std::uint64_t seed) {
  if (c.experiment != ExperimentKind::fig5) return {c.sigma.empty() ? 2.0 : c.sigma.front()};
  if (!c.sigma.empty()) return c.sigma;
  Rng rng = Rng(seed).split(1000);
  std::vector<double> out(c.N);
  for (auto& s : out) {
    do {
      s = 4.0 * rng.uniform();
    } while (s == 0.0);
  }
  return out;
}

std::unique_ptr<Learner> make_learner(const std::string& name, const Context& ctx, const World& w,
                                      const std::shared_ptr<TransitionCounts>& shared) {
  const auto& c = ctx.config();
  const Dims dims = w.costs.dims();
  const std::size_t L = ctx.horizon();
  if (name == "ucrl2mc") {
    auto l = std::make_unique<Ucrl2McLearner>(dims, L, c.delta, w.costs, shared);
    l->set_radius_scale(c.radius_scale);
    return l;
  }
  if (name == "ucrl2") {
    std::optional<std::vector<double>> known;
    if (c.known_cost) known = augmented_expected_cost(w.oracle->model(), w.costs);
    auto l = std::make_unique<Ucrl2Learner>(dims, L, c.delta, known);
    l->set_radius_scale(c.radius_scale);
    return l;
  }
  if (name == "machine") return make_fixed_agent(kMachine, L, dims.states, dims.agents);
  if (name == "human") return make_fixed_agent(kHuman, L, dims.states, dims.agents);
  return std::make_unique<FixedPolicyLearner>("optimal", w.oracle->optimal().policy);
}

json stats_json(const ControlStats& s, const Environment& env) {
  json by = json::object();
  for (std::size_t c = 0; c < s.steps_by_category.size(); ++c) {
    const auto n = s.steps_by_category[c];
    const auto h = s.human_by_category[c];
    by[env.category_name(static_cast<int>(c))] = {
        {"steps", n}, {"human_steps", h}, {"human_fraction", n == 0 ? json(nullptr) : json(double(h) / double(n))}};
  }
  return {{"steps", s.steps},
          {"human_steps", s.human_steps},
          {"switches", s.switches},
          {"human_fraction", s.human_fraction()},
          {"by_category", by}};
}

// Everything accumulated while one learner runs, enough to resume it.
struct Progress {
  std::vector<RegretCurve> curves;
  std::vector<ControlStats> stats;
  std::vector<ControlStats> final_stats;
  std::vector<double> realized;
  json strips = json::array();
  std::vector<std::vector<bool>> strip_taken;

  Progress(std::size_t teams, std::size_t horizon, std::size_t targets, std::size_t categories)
      : curves(teams), stats(teams), final_stats(teams), realized(teams, 0.0),
        strip_taken(targets, std::vector<bool>(categories, false)) {
    for (auto& c : curves) c.horizon = horizon;
  }

  json to_json() const {
    json j = {{"delta", json::array()}, {"stats", json::array()}, {"final_stats", json::array()},
              {"realized", realized}, {"strips", strips},       {"strip_taken", strip_taken}};
    for (std::size_t i = 0; i < curves.size(); ++i) {
      j["delta"].push_back(curves[i].delta);
      j["stats"].push_back(stats[i].to_json());
      j["final_stats"].push_back(final_stats[i].to_json());
    }
    return j;
  }

  void load(const json& j) {
    const auto& delta = j.at("delta");
    if (delta.size() != curves.size()) throw ParameterError("checkpoint has a different number of teams");
    for (std::size_t i = 0; i < curves.size(); ++i) {
      const std::size_t horizon = curves[i].horizon;
      curves[i] = RegretCurve{};
      curves[i].horizon = horizon;
      for (double d : delta[i].get<std::vector<double>>()) curves[i].push(d);
      stats[i] = ControlStats::from_json(j.at("stats")[i]);
      final_stats[i] = ControlStats::from_json(j.at("final_stats")[i]);
    }
    realized = j.at("realized").get<std::vector<double>>();
    strips = j.at("strips");
    strip_taken = j.at("strip_taken").get<std::vector<std::vector<bool>>>();
  }
};

class SeedRunner {
 public:
  SeedRunner(const Context& ctx, std::uint64_t seed, fs::path dir, const RunOptions& opts, std::uint64_t& used)
      : ctx_(ctx), cfg_(ctx.config()), seed_(seed), dir_(std::move(dir)), opts_(opts), used_(used) {
    const auto sigmas = team_sigmas(cfg_, seed_);
    for (double s : sigmas) worlds_.push_back(ctx_.world(s));
  }

  RunStatus run() {
    fs::create_directories(dir_);
    const fs::path ckpt_path = dir_ / "checkpoint.json";
    if (fs::exists(ckpt_path)) {
      ckpt_ = read_json(ckpt_path);
      if (ckpt_.value("config_hash", "") != cfg_.hash() || ckpt_.value("seed", std::uint64_t{0}) != seed_) {
        throw ParameterError("checkpoint in " + dir_.string() + " belongs to a different configuration");
      }
    } else {
      ckpt_ = {{"config_hash", cfg_.hash()}, {"seed", seed_}, {"learners", json::object()}};
    }
    for (const auto& name : cfg_.learners) {
      if (run_learner(name) == RunStatus::halted) return RunStatus::halted;
    }
    write_summary();
    return RunStatus::completed;
  }

 private:
  RunStatus run_learner(const std::string& name) {
    json& entry = ckpt_["learners"][name];
    if (entry.is_object() && entry.value("status", "") == "done") return RunStatus::completed;
    const bool resuming = entry.is_object() && entry.value("status", "") == "running";

    const fs::path episodes_path = dir_ / ("episodes-" + name + ".jsonl");
    const fs::path regret_path = dir_ / ("regret-" + name + ".csv");
    if (resuming) {
      const auto& off = entry.at("offsets");
      truncate_to(episodes_path, off.at("episodes").get<std::uintmax_t>());
      truncate_to(regret_path, off.at("regret").get<std::uintmax_t>());
    }
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> episodes(std::fopen(episodes_path.c_str(), resuming ? "ab" : "wb"),
                                                             &std::fclose);
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> regret(std::fopen(regret_path.c_str(), resuming ? "ab" : "wb"),
                                                           &std::fclose);
    if (!episodes || !regret) throw std::runtime_error("cannot open output files in " + dir_.string());
    RegretCsvWriter csv(regret.get());
    if (!resuming) csv.header();

    std::shared_ptr<TransitionCounts> shared;
    const bool multi = worlds_.size() > 1;
    const Dims dims = worlds_.front().costs.dims();
    if (name == "ucrl2mc" && multi && cfg_.share_env) {
      shared = std::make_shared<TransitionCounts>(dims.states, dims.actions, dims.states);
    }
    Rng base = Rng(seed_).split(learner_stream(name));
    std::vector<Team> teams;
    for (std::size_t i = 0; i < worlds_.size(); ++i) {
      const auto& w = worlds_[i];
      teams.push_back({w.env, w.agents, w.costs, make_learner(name, ctx_, w, shared), base.split(i), kMachine});
    }
    Coordinator coord(std::move(teams), shared);
    const std::size_t L = ctx_.horizon();
    const bool want_strips = cfg_.experiment == ExperimentKind::fig3 && ctx_.is_lane();
    Progress progress(worlds_.size(), L, want_strips ? cfg_.strip_episodes.size() : 0, ctx_.categories());
    if (resuming) {
      try {
        coord.restore(entry.at("coordinator"));
        progress.load(entry.at("progress"));
      } catch (const json::exception& e) {
        throw ParameterError("corrupt checkpoint for " + name + ": " + e.what());
      } catch (const StructuralError& e) {
        throw ParameterError("corrupt checkpoint for " + name + ": " + e.what());
      }
    }

    std::vector<std::unordered_map<std::string, double>> cache(worlds_.size());
    const std::uint64_t final_from = cfg_.K - cfg_.K / 10;
    auto observer = [&](std::size_t team, const EpisodeLog& log, const SwitchingPolicy& policy) {
      const auto& w = worlds_[team];
      auto [it, fresh] = cache[team].try_emplace(log.policy_hash, 0.0);
      if (fresh) it->second = w.oracle->regret(policy);
      const double delta = it->second;
      progress.curves[team].push(delta);
      const ControlStats cs = control_stats(log, *w.env, ctx_.categories());
      progress.stats[team].merge(cs);
      if (log.k > final_from) progress.final_stats[team].merge(cs);
      progress.realized[team] += log.realized_cost();
      const int cat = w.env->category(log.s1);
      csv.row(team, log.k, L, delta, progress.curves[team].total(), cs, w.env->category_name(cat));
      EpisodeLog record = log;
      record.seed = seed_;
      const std::string line = record.to_json().dump() + "\n";
      std::fputs(line.c_str(), episodes.get());
      if (want_strips) record_strip(progress, name, team, log, cat);
    };

    auto save = [&](const char* status) {
      std::fflush(episodes.get());
      std::fflush(regret.get());
      entry = {{"status", status},
               {"offsets", {{"episodes", std::ftell(episodes.get())}, {"regret", std::ftell(regret.get())}}},
               {"coordinator", coord.checkpoint()},
               {"progress", progress.to_json()}};
      write_json(dir_ / "checkpoint.json", ckpt_);
    };

    while (coord.rounds() < cfg_.K) {
      if (opts_.halt_after && used_ >= *opts_.halt_after) {
        save("running");
        return RunStatus::halted;
      }
      coord.run_round(observer);
      ++used_;
      if (coord.rounds() % cfg_.checkpoint_every == 0 && coord.rounds() < cfg_.K) save("running");
    }
    std::fflush(episodes.get());
    std::fflush(regret.get());
    entry = {{"status", "done"}, {"result", result_json(name, progress)}, {"strips", progress.strips}};
    write_json(dir_ / "checkpoint.json", ckpt_);
    if (!opts_.quiet) {
      std::fprintf(stderr, "seed %llu %s: K=%llu regret=%.6g\n", static_cast<unsigned long long>(seed_), name.c_str(),
                   static_cast<unsigned long long>(cfg_.K), entry["result"]["final_regret"].get<double>());
    }
    return RunStatus::completed;
  }

  void record_strip(Progress& p, const std::string& name, std::size_t team, const EpisodeLog& log, int cat) {
    for (std::size_t j = 0; j < cfg_.strip_episodes.size(); ++j) {
      if (log.k < cfg_.strip_episodes[j] || p.strip_taken[j][cat]) continue;
      p.strip_taken[j][cat] = true;
      std::vector<StateId> states;
      std::vector<AgentId> controllers;
      for (const auto& s : log.steps) {
        states.push_back(s.s);
        controllers.push_back(s.d);
      }
      p.strips.push_back({{"learner", name},
                          {"team", team},
                          {"target_k", cfg_.strip_episodes[j]},
                          {"k", log.k},
                          {"gamma0", worlds_[team].env->category_name(cat)},
                          {"cx", cfg_.cx},
                          {"cch", cfg_.cch},
                          {"strip", lane::trajectory_strip(states, controllers)}});
    }
  }

  json result_json(const std::string& name, const Progress& p) const {
    const RegretCurve total = multi_team_regret(p.curves);
    ControlStats all, fin;
    double realized = 0.0;
    json per_team = json::array();
    for (std::size_t i = 0; i < p.curves.size(); ++i) {
      all.merge(p.stats[i]);
      fin.merge(p.final_stats[i]);
      realized += p.realized[i];
      per_team.push_back({{"sigma", worlds_[i].sigma},
                          {"final_regret", p.curves[i].total()},
                          {"optimal_value", worlds_[i].oracle->optimal_value()}});
    }
    const auto& env = *worlds_.front().env;
    return {{"learner", name},
            {"episodes", cfg_.K},
            {"teams", p.curves.size()},
            {"final_regret", total.total()},
            {"regret_at_half", total.at(total.episodes() / 2)},
            {"sublinearity_score", total.episodes() >= 4 ? finite_or_null(sublinearity_score(total)) : json(nullptr)},
            {"mean_realized_cost", realized / static_cast<double>(cfg_.K * p.curves.size())},
            {"per_team", per_team},
            {"control", stats_json(all, env)},
            {"control_final10", stats_json(fin, env)}};
  }

  void write_summary() const {
    json learners = json::object();
    json strips = json::array();
    for (const auto& name : cfg_.learners) {
      const auto& e = ckpt_.at("learners").at(name);
      learners[name] = e.at("result");
      for (const auto& s : e.at("strips")) strips.push_back(s);
    }
    write_json(dir_ / "summary.json",
               {{"seed", seed_}, {"experiment", to_string(cfg_.experiment)}, {"learners", learners}});
    if (cfg_.experiment == ExperimentKind::fig3 && ctx_.is_lane()) write_json(dir_ / "strips.json", strips);
  }

  static void truncate_to(const fs::path& p, std::uintmax_t size) {
    if (!fs::exists(p) || fs::file_size(p) < size) throw ParameterError("output file shorter than its checkpoint: " + p.string());
    fs::resize_file(p, size);
  }

  const Context& ctx_;
  const ExperimentConfig& cfg_;
  std::uint64_t seed_;
  fs::path dir_;
  const RunOptions& opts_;
  std::uint64_t& used_;
  std::vector<World> worlds_;
  json ckpt_;
};

std::string seed_dir(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

// Total cumulative regret per k (summed over teams) read back from a seed's CSV.
std::vector<double> read_total_curve(const fs::path& csv, std::uint64_t K) {
  std::ifstream in(csv);
  if (!in) throw std::runtime_error("missing " + csv.string());
  std::vector<double> total(K, 0.0);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw std::runtime_error("malformed row in " + csv.string());
    const auto k = std::stoull(cells[1]);
    if (k < 1 || k > K) throw std::runtime_error("episode index out of range in " + csv.string());
    total[k - 1] += std::stod(cells[4]);
  }
  return total;
}

void write_aggregate(const ExperimentConfig& cfg, const fs::path& out, std::size_t horizon) {
  for (const auto& name : cfg.learners) {
    std::vector<std::vector<double>> curves;
    for (auto seed : cfg.seeds) {
      curves.push_back(read_total_curve(out / seed_dir(seed) / ("regret-" + name + ".csv"), cfg.K));
    }
    std::string text = "k,t_steps,mean_cum_regret,min_cum_regret,max_cum_regret,seeds\n";
    char buf[160];
    for (std::uint64_t k = 0; k < cfg.K; ++k) {
      double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& c : curves) {
        sum += c[k];
        lo = std::min(lo, c[k]);
        hi = std::max(hi, c[k]);
      }
      std::snprintf(buf, sizeof buf, "%llu,%llu,%.12g,%.12g,%.12g,%zu\n", static_cast<unsigned long long>(k + 1),
                    static_cast<unsigned long long>((k + 1) * horizon), sum / double(curves.size()), lo, hi,
                    curves.size());
      text += buf;
    }
    write_text(out / ("aggregate-" + name + ".csv"), text);
  }
}

json range_json(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  double sum = 0.0;
  for (double x : v) sum += x;
  return {{"mean", sum / double(v.size())},
          {"min", *std::min_element(v.begin(), v.end())},
          {"max", *std::max_element(v.begin(), v.end())}};
}

void write_top_summary(const ExperimentConfig& cfg, const fs::path& out) {
  json seeds = json::array();
  std::map<std::string, std::vector<double>> finals, scores;
  for (auto seed : cfg.seeds) {
    const json s = read_json(out / seed_dir(seed) / "summary.json");
    for (const auto& name : cfg.learners) {
      const auto& r = s.at("learners").at(name);
      finals[name].push_back(r.at("final_regret").get<double>());
      if (!r.at("sublinearity_score").is_null()) scores[name].push_back(r.at("sublinearity_score").get<double>());
    }
    seeds.push_back(s);
  }
  json agg = json::object();
  for (const auto& name : cfg.learners) {
    agg[name] = {{"final_regret", range_json(finals[name])}, {"sublinearity_score", range_json(scores[name])}};
  }
  write_json(out / "summary.json", {{"config", cfg.to_json()}, {"seeds", seeds}, {"aggregate", agg}});
}

RunStatus run_learning(const ExperimentConfig& cfg, const fs::path& out, const RunOptions& opts) {
  const Context ctx(cfg);
  std::uint64_t used = 0;
  for (auto seed : cfg.seeds) {
    const fs::path dir = out / seed_dir(seed);
    if (fs::exists(dir / "summary.json")) continue;
    SeedRunner runner(ctx, seed, dir, opts, used);
    if (runner.run() == RunStatus::halted) return RunStatus::halted;
  }
  write_aggregate(cfg, out, ctx.horizon());
  write_top_summary(cfg, out);
  return RunStatus::completed;
}

TabularDist mixture(const std::vector<TabularDist>& parts) {
  std::vector<double> dense(parts.front().universe(), 0.0);
  for (const auto& p : parts) {
    const auto d = p.dense();
    for (std::size_t i = 0; i < d.size(); ++i) dense[i] += d[i] / static_cast<double>(parts.size());
  }
  return TabularDist::from_dense(dense);
}

RunStatus run_fig2(const ExperimentConfig& cfg, const fs::path& out) {
  lane::LaneConfig base;
  base.horizon = cfg.L;
  const Context ctx(cfg);
  const auto& env = ctx.lane_env();
  auto start_for = [&](std::optional<lane::Traffic> t) {
    lane::LaneConfig c = base;
    c.initial_traffic = t;
    return lane::LaneEnvironment(c).initial_distribution();
  };
  const std::vector<std::pair<std::string, TabularDist>> starts{
      {"no-car", start_for(lane::Traffic::no_car)},
      {"light", start_for(lane::Traffic::light)},
      {"heavy", start_for(lane::Traffic::heavy)},
      {"light+heavy", mixture({start_for(lane::Traffic::light), start_for(lane::Traffic::heavy)})},
      {"uniform", start_for(std::nullopt)},
  };
  std::string csv = "gamma0,agent,sigma,expected_cost\n";
  json rows = json::array();
  char buf[200];
  auto emit = [&](const std::string& g, const std::string& agent, double sigma, double v) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.6g,%.12g\n", g.c_str(), agent.c_str(), sigma, v);
    csv += buf;
    rows.push_back({{"gamma0", g}, {"agent", agent}, {"sigma", sigma}, {"expected_cost", v}});
  };
  const std::size_t L = cfg.L;
  for (double sigma : cfg.sigma) {
    auto human = std::make_shared<const lane::HumanAgent>(env, lane::HumanSpec{sigma});
    const auto model = lane::team_model(*env, {ctx.machine(), human});
    const auto state_cost = env->state_costs();
    const auto free = CostParams::from_state_costs(model.dims, state_cost, 0.0, 0.0);
    const auto priced = CostParams::from_state_costs(model.dims, state_cost, cfg.cch, cfg.cx);
    const auto machine_v = evaluate_policy(SwitchingPolicy::constant(L, model.dims.states, 2, kMachine), model, free);
    const auto human_v = evaluate_policy(SwitchingPolicy::constant(L, model.dims.states, 2, kHuman), model, free);
    const auto team = exact_backward_dp(model, priced, L);
    for (const auto& [g, start] : starts) {
      const InitialCondition init{start, kMachine};
      if (sigma == cfg.sigma.front()) emit(g, "machine", 0.0, machine_v.expected_start(init));
      emit(g, "human", sigma, human_v.expected_start(init));
      emit(g, "optimal-team", sigma, team.values.expected_start(init));
    }
  }
  for (const auto& [g, start] : starts) emit(g, "optimal-driver", 0.0, lane::optimal_driving_cost(*env, start));
  write_text(out / "fig2.csv", csv);
  write_json(out / "summary.json", {{"config", cfg.to_json()}, {"rows", rows}});
  return RunStatus::completed;
}

RunStatus run_tiny_validate(const ExperimentConfig& cfg, const fs::path& out, const RunOptions& opts) {
  json checks = json::array();
  bool ok = true;
  for (auto seed : cfg.seeds) {
    for (const auto& r : tiny_validation_suite(seed)) {
      ok = ok && r.passed;
      checks.push_back({{"seed", seed}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
      if (!opts.quiet) {
        std::printf("%s %-22s %s (%.2fs)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
      }
    }
  }
  write_json(out / "summary.json", {{"config", cfg.to_json()}, {"checks", checks}, {"passed", ok}});
  return ok ? RunStatus::completed : RunStatus::failed;
}

RunStatus dispatch(const ExperimentConfig& cfg, const fs::path& out, const RunOptions& opts) {
  switch (cfg.experiment) {
    case ExperimentKind::fig2: return run_fig2(cfg, out);
    case ExperimentKind::tiny_validate: return run_tiny_validate(cfg, out, opts);
    default: return run_learning(cfg, out, opts);
  }
}

}  // namespace

RunStatus run_experiment(const ExperimentConfig& config, const fs::path& out, const RunOptions& opts) {
  config.validate();
  fs::create_directories(out);
  for (auto seed : config.seeds) fs::remove_all(out / seed_dir(seed));
  fs::remove(out / "summary.json");
  write_json(out / "config.json", config.to_json());
  return dispatch(config, out, opts);
}

RunStatus resume_experiment(const fs::path& out, const RunOptions& opts) {
  ExperimentConfig config;
  const json snapshot = read_json(out / "config.json");
  try {
    config.apply_json(snapshot);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("corrupt configuration snapshot: ") + e.what());
  }
  config.validate();
  if (config.to_json() != snapshot) throw ParameterError("configuration snapshot does not round-trip");
  if (fs::exists(out / "summary.json")) return RunStatus::completed;
  for (auto seed : config.seeds) {
    const fs::path ckpt = out / seed_dir(seed) / "checkpoint.json";
    if (!fs::exists(ckpt)) continue;
    const json j = read_json(ckpt);
    if (j.value("config_hash", "") != config.hash()) {
      throw ParameterError("checkpoint " + ckpt.string() + " does not match config.json (hash mismatch)");
    }
  }
  return dispatch(config, out, opts);
}

std::vector<CheckResult> tiny_validation_suite(std::uint64_t seed) {
  Rng rng(seed);
  return {check_l1_kernel(200, rng.split(1).seed()),
          check_dp_enumeration(50, rng.split(2).seed()),
          check_zero_radius(20, rng.split(3).seed()),
          check_optimism(20, rng.split(4).seed()),
          check_coverage(1000, rng.split(5).seed()),
          check_human_sampler(20, 100000, rng.split(6).seed()),
          check_env_sampler(20, 100000, rng.split(7).seed())};
}

}  // namespace switching
