// Command-line front end: run, sweep and check.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fwcbf/cli.hpp"

namespace {

void add_common(CLI::App* cmd, fwcbf::cli::RunManifest& m) {
  cmd->add_option("--scenario", m.scenario,
                  "builtin scenario: example1, example2, example2_shaped, sweep, circle20");
  cmd->add_option("--config", m.config, "scenario JSON file");
  cmd->add_option("--out", m.out_dir, "output directory");
  cmd->add_option("--seed", m.seed, "seed for randomized checks");
  cmd->add_option("--dt", m.dt, "integration step, s");
  cmd->add_option("--mode", m.mode, "filter mode: centralized or split");
  cmd->add_option("--xi", m.xi, "shaping plateau threshold (default: from range)");
  cmd->add_option("--beta", m.beta, "shaping knee fraction in (0, 1)");
  cmd->add_option("--alpha", m.alpha, "slope of the linear class-K gain, 1/s");
  cmd->add_option("--barrier", m.barrier, "barrier kind: turn or straight");
  cmd->add_option("--shaping", m.shaping, "use the sensor-compatible barrier");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensor-compatible barrier functions for fixed-wing collision avoidance"};
  app.require_subcommand(1);

  fwcbf::cli::RunManifest run_m;
  auto* run = app.add_subcommand("run", "simulate one scenario");
  add_common(run, run_m);
  run->add_option("--range", run_m.range, "sensing range");

  fwcbf::cli::RunManifest sweep_m;
  std::vector<double> ranges;
  auto* sweep = app.add_subcommand("sweep", "minimum distance versus sensing range");
  add_common(sweep, sweep_m);
  sweep->add_option("--range", ranges, "sensing ranges (repeat or comma separated)")
      ->delimiter(',')
      ->required();

  fwcbf::cli::RunManifest check_m;
  auto* check = app.add_subcommand("check", "sensor compatibility report");
  add_common(check, check_m);
  check->add_option("--range", check_m.range, "sensing range");
  check->add_option("--samples", check_m.samples, "sampled states outside the sensed set");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fwcbf::cli::kBadConfig;
  }

  if (*run) return fwcbf::cli::cmd_run(run_m, std::cout);
  if (*sweep) return fwcbf::cli::cmd_sweep(sweep_m, ranges, std::cout);
  return fwcbf::cli::cmd_check(check_m, std::cout);
}
