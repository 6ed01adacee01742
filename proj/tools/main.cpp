#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "switching/experiment.hpp"
#include "switching/types.hpp"

namespace fs = std::filesystem;
using switching::ExperimentConfig;
using switching::ParameterError;
using switching::RunStatus;

namespace {

const char* kKeys[] = {"env",      "K",          "L",         "N",        "delta",           "sigma",
                       "cx",       "cch",        "gamma0",    "seeds",    "seed",            "learners",
                       "share_env", "machine_trainer", "q_episodes", "q_seed", "radius_scale", "known_cost",
                       "checkpoint_every", "strip_episodes"};

struct ConfigFlags {
  std::string file;
  std::string experiment;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key = value or JSON configuration file");
    app->add_option("--experiment", experiment, "fig2 | fig3 | fig4 | fig5 | tiny-validate");
    for (const char* key : kKeys) app->add_option(std::string("--") + key, values[key], key);
  }

  ExperimentConfig resolve(CLI::App* app) const {
    ExperimentConfig cfg;
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw ParameterError("cannot read config file " + file);
      std::stringstream text;
      text << in.rdbuf();
      cfg.apply_text(text.str());
    }
    if (!experiment.empty()) cfg.set("experiment", experiment);
    for (const char* key : kKeys) {
      if (app->count(std::string("--") + key) > 0) cfg.set(key, values.at(key));
    }
    cfg.validate();
    return cfg;
  }
};

fs::path output_root() {
  const char* env = std::getenv("SWITCHING_OUT");
  return env && *env ? fs::path(env) : fs::path("runs");
}

fs::path run_directory(const fs::path& given) {
  if (fs::is_regular_file(given)) {
    for (fs::path p = given.parent_path(); !p.empty(); p = p.parent_path()) {
      if (fs::exists(p / "config.json")) return p;
      if (p == p.parent_path()) break;
    }
    throw ParameterError("no config.json above " + given.string());
  }
  return given;
}

int report(RunStatus status, const fs::path& out) {
  switch (status) {
    case RunStatus::completed:
      std::fprintf(stderr, "done: %s\n", out.c_str());
      return 0;
    case RunStatus::halted:
      std::fprintf(stderr, "halted with checkpoint: %s\n", out.c_str());
      return 0;
    case RunStatus::failed:
      std::fprintf(stderr, "checks failed: %s\n", out.c_str());
      return 1;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Switching-control learning workbench"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  std::string run_out;
  std::uint64_t halt_after = 0;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run an experiment");
  run_flags.attach(run);
  run->add_option("--out", run_out, "Output directory (default $SWITCHING_OUT/<experiment>)");
  run->add_option("--halt-after", halt_after, "Stop with a checkpoint after this many rounds");
  run->add_flag("--quiet", quiet, "Less progress output");

  std::string resume_path;
  auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
  resume->add_option("path", resume_path, "Run directory or checkpoint file")->required();
  resume->add_option("--halt-after", halt_after, "Stop with a checkpoint after this many rounds");
  resume->add_flag("--quiet", quiet, "Less progress output");

  ConfigFlags validate_flags;
  auto* validate = app.add_subcommand("validate", "Check a configuration and print it resolved");
  validate_flags.attach(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    switching::RunOptions opts;
    opts.quiet = quiet;
    if (halt_after > 0) opts.halt_after = halt_after;
    if (*run) {
      const auto cfg = run_flags.resolve(run);
      const fs::path out = run_out.empty() ? output_root() / to_string(cfg.experiment) : fs::path(run_out);
      return report(switching::run_experiment(cfg, out, opts), out);
    }
    if (*resume) {
      const fs::path out = run_directory(resume_path);
      return report(switching::resume_experiment(out, opts), out);
    }
    if (*validate) {
      const auto cfg = validate_flags.resolve(validate);
      std::printf("%s\nhash %s\n", cfg.to_json().dump(2).c_str(), cfg.hash().c_str());
      return 0;
    }
  } catch (const ParameterError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime failure: %s\n", e.what());
    return 1;
  }
  return 0;
}
