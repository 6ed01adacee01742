#pragma once

// Experiment configuration, execution and artifact layout.
//
// Layout of an output directory:
//   config.json                  snapshot of the resolved configuration
//   summary.json                 per-seed results plus an aggregate
//   aggregate-<learner>.csv      mean/min/max cumulative regret per k (multi-seed)
//   seed-<s>/checkpoint.json     resumable state
//   seed-<s>/episodes-<learner>.jsonl
//   seed-<s>/regret-<learner>.csv
//   seed-<s>/strips.json         trajectory strips (fig3)
//   seed-<s>/summary.json

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switching/validation.hpp"

namespace switching {

enum class ExperimentKind { fig2, fig3, fig4, fig5, tiny_validate };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_from_string(const std::string& s);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::fig4;
  std::string env = "lane";  // lane | tiny
  std::uint64_t K = 20000;
  std::size_t L = 10;
  std::size_t N = 10;
  double delta = 0.1;
  std::vector<double> sigma{2.0};
  double cx = 0.1;
  double cch = 0.2;
  std::string gamma0 = "uniform";
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::string> learners{"ucrl2mc", "ucrl2", "machine", "human"};
  bool share_env = true;
  std::string machine_trainer = "q-learning";
  std::size_t q_episodes = 50000;
  std::uint64_t q_seed = 1;
  double radius_scale = 1.0;
  bool known_cost = false;
  std::uint64_t checkpoint_every = 1000;
  std::vector<std::uint64_t> strip_episodes{5, 500, 3000};

  /// Full-scale defaults for one experiment kind.
  static ExperimentConfig defaults(ExperimentKind kind);

  /// Throws ParameterError on out-of-range values.
  void validate() const;

  nlohmann::json to_json() const;
  /// Missing keys keep their current values.
  void apply_json(const nlohmann::json& j);
  /// One `key = value` per line; `#` starts a comment. JSON objects are
  /// accepted too.
  void apply_text(const std::string& text);
  /// Applies a single key with a textual value.
  void set(const std::string& key, const std::string& value);

  /// FNV-1a of the canonical JSON dump.
  std::string hash() const;
};

/// Parses "1,2,5" and ranges "1..10".
std::vector<std::uint64_t> parse_seed_list(const std::string& s);

struct RunOptions {
  /// Stop (with a checkpoint) after this many rounds in total across the
  /// run's learners; used to exercise resume.
  std::optional<std::uint64_t> halt_after;
  bool quiet = false;
};

enum class RunStatus { completed, halted, failed };

/// Runs every seed of the experiment into `out`. Throws ParameterError for
/// invalid configurations.
RunStatus run_experiment(const ExperimentConfig& config, const std::filesystem::path& out, const RunOptions& opts = {});

/// Continues an interrupted run from its checkpoints. Finished seeds are left
/// untouched. Throws ParameterError when the snapshot and the checkpoints
/// disagree.
RunStatus resume_experiment(const std::filesystem::path& out, const RunOptions& opts = {});

/// Oracle suites on small instances, as run by the tiny-validate experiment.
std::vector<CheckResult> tiny_validation_suite(std::uint64_t seed);

}  // namespace switching
