#include <iostream>

#include <omp.h>

#include "CLI11.hpp"
#include "commands.hpp"
#include "qsmooth/errors.hpp"

using namespace qsmooth;
using namespace qsmooth::cli;

int main(int argc, char** argv) {
  CLI::App app{"qsmooth: filtering and smoothing of classical signals driving a measured quantum system"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "OpenMP threads for the grid kernels (0: runtime default)");

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Simulate a truth trajectory and measurement record");
  simulate->add_option("--config", sim.config, "Scenario JSON")->required();
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--seed", sim.seed, "Override the config seed");

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Run estimators on a recorded trajectory");
  estimate->add_option("--config", est.config, "Scenario JSON")->required();
  estimate->add_option("--record", est.record, "Record stem or simulate output directory")->required();
  estimate->add_option("--out", est.out, "Output directory")->required();
  estimate->add_option("--methods", est.methods,
                       "Comma list of filter, smooth, retrodict, kalman, kalman-smooth")
      ->capture_default_str();
  estimate->add_option("--stride", est.stride, "Output every N-th step (0: scenario default)");
  estimate->add_option("--density-stride", est.density_stride,
                       "Append the grid density to every N-th output row (0: never)");
  estimate->add_option("--snapshot-dir", est.snapshot_dir,
                       "Also write forward/backward field snapshots at the output stride");
  estimate->add_option("--parallelism", threads, "OpenMP threads for the grid kernels");

  EnsembleArgs ens;
  auto* ensemble = app.add_subcommand("ensemble", "Seeded ensemble of simulate + estimate runs");
  ensemble->add_option("--config", ens.config, "Scenario JSON")->required();
  ensemble->add_option("--out", ens.out, "Output directory")->required();
  ensemble->add_option("--runs", ens.runs, "Number of runs (>= 2)")->capture_default_str();
  ensemble->add_option("--seed", ens.seed, "First seed")->capture_default_str();
  ensemble->add_option("--methods", ens.methods, "Comma list of methods")->capture_default_str();
  ensemble->add_option("--parallelism", ens.parallelism, "Concurrent runs")->capture_default_str();
  ensemble->add_option("--stride", ens.stride, "Score every N-th step (0: scenario default)");

  OracleCheckArgs orc;
  auto* oracle = app.add_subcommand("oracle-check",
                                    "Convergence of the grid smoother to the exact discrete oracle");
  oracle->add_option("--levels", orc.levels, "Number of dt levels starting at 1e-2")
      ->capture_default_str();
  oracle->add_option("--steps", orc.steps,
                     "Only compare an N-step run against the oracle built from the same factors");
  oracle->add_flag("--inject-dt-mismatch", orc.inject_dt_mismatch,
                   "Test mode: feed a record sampled at the wrong dt");

  DeriveLgArgs lg;
  auto* derive = app.add_subcommand("derive-lg", "Print the linear-Gaussian phase-space model");
  derive->add_option("--config", lg.config, "Scenario JSON")->required();
  derive->add_option("--out", lg.out, "Output directory (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  if (threads > 0) omp_set_num_threads(static_cast<int>(threads));

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*estimate) return cmd_estimate(est);
    if (*ensemble) return cmd_ensemble(ens);
    if (*oracle) return cmd_oracle_check(orc);
    if (*derive) return cmd_derive_lg(lg);
  } catch (const ConfigError& e) {
    std::cerr << "config error";
    if (!e.key_path().empty()) std::cerr << " at " << e.key_path();
    std::cerr << ": " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    // covers InvalidGrid and UnsupportedScenario
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::length_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
