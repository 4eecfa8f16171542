#include "cavityctl/cavityctl.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

namespace {

enum ExitCode { kOk = 0, kRuntimeError = 1, kConfigError = 2, kTruncation = 3 };

int run(const std::string& subcommand, const std::string& config_path, const std::string& out, std::int64_t seed,
        int workers, bool quiet) {
  using namespace cavityctl;
  ExperimentConfig cfg = load_config(config_path);
  if (to_string(cfg.workflow) != subcommand)
    throw ConfigError("workflow: config declares '" + to_string(cfg.workflow) + "' but subcommand is '" + subcommand + "'");
  if (cfg.optimize) {
    if (seed >= 0) cfg.optimize->optimizer.rng_seed = static_cast<std::uint64_t>(seed);
    if (workers > 0) {
      cfg.optimize->optimizer.workers = workers;
    } else if (const char* env = std::getenv("CAVITYCTL_WORKERS")) {
      try {
        const int w = std::stoi(env);
        if (w < 1) throw std::invalid_argument("");
        cfg.optimize->optimizer.workers = w;
      } catch (const std::exception&) {
        throw ConfigError(std::string("CAVITYCTL_WORKERS: expected a positive integer, got '") + env + "'");
      }
    }
  }
  if (!out.empty()) cfg.output.dir = out;
  RunContext ctx;
  ctx.out_dir = cfg.output.dir;
  ctx.log = quiet ? nullptr : &std::cerr;
  const auto res = run_workflow(cfg, ctx);
  if (!quiet) std::cout << res.summary.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulse-package control of spin ensembles coupled to a lossy cavity"};
  app.require_subcommand(1);
  std::string config_path, out;
  std::int64_t seed = -1;
  int workers = 0;
  bool quiet = false;
  for (const char* name : {"propagate", "optimize", "controllability", "scan", "bump", "free-decay"}) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + " workflow");
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "optimizer seed (overrides optimize.seed)")->check(CLI::NonNegativeNumber);
    sub->add_option("--workers", workers, "evaluation workers (else CAVITYCTL_WORKERS, else config)")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", quiet, "suppress progress and summary output");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string subcommand = app.get_subcommands().front()->get_name();
  try {
    return run(subcommand, config_path, out, seed, workers, quiet);
  } catch (const cavityctl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const cavityctl::TruncationError& e) {
    std::cerr << "truncation error: " << e.what() << '\n';
    return kTruncation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}
