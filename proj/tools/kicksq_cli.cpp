#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "kicksq/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stroboscopic second-moment simulator for a kicked mechanical resonator"};
  kicksq::RunOptions opts;

  std::string scenario, config, out;
  std::uint64_t seed = 0, trajectories = 0, kicks = 0, stride = 0;
  auto* scenario_opt = app.add_option("--scenario", scenario, "Preset: fig1, fig2 or fig3")
                           ->check(CLI::IsMember({"fig1", "fig2", "fig3"}));
  auto* config_opt = app.add_option("--config", config, "Path to a run configuration file");
  scenario_opt->excludes(config_opt);
  auto* out_opt = app.add_option("--out", out, "Trajectory CSV path (summary goes to <out>.summary.txt)");
  auto* seed_opt = app.add_option("--seed", seed, "Ensemble base seed");
  auto* traj_opt = app.add_option("--trajectories", trajectories, "Ensemble size")
                       ->check(CLI::PositiveNumber);
  auto* kicks_opt = app.add_option("--kicks", kicks, "Number of kicks");
  auto* stride_opt = app.add_option("--stride", stride, "Record every n-th kick")
                         ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", opts.quiet, "Do not print the summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kicksq::kExitValidation;
  }

  if (*scenario_opt) opts.scenario = scenario;
  if (*config_opt) opts.config_path = config;
  if (*out_opt) opts.out = out;
  if (*seed_opt) opts.seed = seed;
  if (*traj_opt) opts.trajectories = trajectories;
  if (*kicks_opt) opts.kicks = kicks;
  if (*stride_opt) opts.stride = stride;
  return kicksq::run_scenario(opts, std::cout, std::cerr);
}
