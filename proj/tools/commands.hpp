#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace qsmooth::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,        // I/O problems, failed checks
  kConfigError = 2,
  kNumerical = 3,
  kPartialEnsemble = 4,
};

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct EstimateArgs {
  std::string config;
  std::string record;  // record stem, or a directory holding record.csv
  std::string out;
  std::string methods = "filter,smooth";
  std::size_t stride = 0;
  std::size_t density_stride = 0;
  std::string snapshot_dir;
};

struct EnsembleArgs {
  std::string config;
  std::string out;
  std::size_t runs = 2;
  std::uint64_t seed = 0;
  std::string methods = "filter,smooth,kalman,kalman-smooth";
  unsigned parallelism = 1;
  std::size_t stride = 0;
};

struct OracleCheckArgs {
  std::size_t levels = 4;         // dt ladder 1e-2, 5e-3, ...
  std::size_t steps = 0;          // > 0: exact pipeline-factor check with this many steps only
  bool inject_dt_mismatch = false;
};

struct DeriveLgArgs {
  std::string config;
  std::string out;
};

int cmd_simulate(const SimulateArgs& args);
int cmd_estimate(const EstimateArgs& args);
int cmd_ensemble(const EnsembleArgs& args);
int cmd_oracle_check(const OracleCheckArgs& args);
int cmd_derive_lg(const DeriveLgArgs& args);

}  // namespace qsmooth::cli
