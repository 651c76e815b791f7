#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qsmooth/estimate_io.hpp"
#include "qsmooth/hybrid_engine.hpp"
#include "qsmooth/truth_simulator.hpp"

namespace qsmooth {

/// Estimators an ensemble (or the estimate command) can run.
/// "filter", "smooth", "retrodict" use the grid pipeline; "kalman" and
/// "kalman-smooth" the linear-Gaussian reduction.
const std::vector<std::string>& known_methods();
/// Splits a comma list and rejects unknown names (std::invalid_argument).
std::vector<std::string> parse_methods(const std::string& list);

/// Estimates of one method at the output steps (step 0 included).
struct MethodOutput {
  std::vector<std::size_t> steps;
  std::vector<EstimateRow> rows;
};

/// Runs the requested methods on one record and samples them at steps 0,
/// stride, 2 stride, ... and N. `engine` may be null when only Kalman
/// methods are requested. When density_stride > 0 the grid methods attach
/// their density to every density_stride-th output row.
std::map<std::string, MethodOutput> estimate_methods(const HybridEngine* engine,
                                                     const Scenario& scenario,
                                                     const TrajectoryRecord& record,
                                                     const std::vector<std::string>& methods,
                                                     std::size_t stride,
                                                     std::size_t density_stride = 0);

struct EnsembleOptions {
  std::vector<std::string> methods;
  std::size_t runs = 2;
  std::uint64_t seed0 = 0;
  unsigned parallelism = 1;
  std::size_t stride = 0;  // 0: scenario default
};

struct EnsembleRun {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  /// Per method: squared error |x_est - x_true|^2 and reported variance
  /// tr cov at every output step.
  std::map<std::string, std::vector<double>> sq_error;
  std::map<std::string, std::vector<double>> variance;
};

struct EnsembleSummary {
  std::vector<std::size_t> steps;
  std::vector<double> t;
  std::vector<EnsembleRun> runs;  // in seed order
  std::size_t failures = 0;
  /// Per method, per output step, over successful runs.
  std::map<std::string, std::vector<double>> mse;
  std::map<std::string, std::vector<double>> se;        // standard error of the mse
  std::map<std::string, std::vector<double>> mean_var;  // mean reported variance
};

/// Simulates runs with seeds seed0, seed0 + 1, ... and scores every method
/// against the simulated truth. Failed runs are recorded, not thrown.
/// Aggregation happens in seed order, so results do not depend on the
/// parallelism.
EnsembleSummary run_ensemble(const Scenario& scenario, const EnsembleOptions& options);

/// Mean of a per-step series over steps whose time lies in [t_lo, t_hi].
double window_mean(const std::vector<double>& t, const std::vector<double>& series, double t_lo,
                   double t_hi);

}  // namespace qsmooth
