#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qsmooth/scenario.hpp"

namespace qsmooth {

/// Ground truth and measurement record on the uniform time grid.
///
/// Row i covers the interval [t0 + i dt, t0 + (i+1) dt): dy[i] is the
/// measurement increment over it and x_true[i] the classical state at its
/// end, so row i is labelled by time(i) = t0 + (i+1) dt. The state at t0 is
/// kept separately in x_initial.
struct TrajectoryRecord {
  double t0 = 0.0;
  double T = 0.0;
  double dt = 0.0;
  RVec x_initial;
  std::vector<RVec> x_true;
  std::vector<RVec> dy;
  std::uint64_t seed = 0;
  std::string scenario_id;
  std::string scenario_hash;

  std::size_t steps() const noexcept { return dy.size(); }
  double time(std::size_t row) const { return t0 + static_cast<double>(row + 1) * dt; }
  /// Throws std::invalid_argument when lengths or the time grid disagree.
  void validate() const;
};

/// Per-step internals of a simulation, for diagnostics and tests.
struct TruthTrace {
  std::vector<RVec> expected_signal;    // (1/2) tr[(C + C^dag) rho_true] before each step
  std::vector<RVec> injected_noise;     // d eta
  std::vector<double> trace_before_norm;
  std::vector<double> min_eigenvalue;   // of rho_true after each step
  std::vector<CMat> rho_true;           // only when keep_states is set
  bool keep_states = false;
};

/// Samples x(t0) from the prior, then per step: emit dy from the current
/// quantum state, apply the Bayes update M(dy) rho M(dy)^dag at the true x,
/// renormalise, evolve rho one Lindblad step at the true x, advance x by
/// Euler-Maruyama. Classical and measurement noise come from separate
/// counter-based streams.
TrajectoryRecord simulate_truth(const Scenario& scenario, std::uint64_t seed,
                                TruthTrace* trace = nullptr);

/// Regenerates the record from its seed and compares x_true and dy bit for
/// bit. Throws std::invalid_argument when the record belongs to a different
/// scenario.
bool replay_check(const TrajectoryRecord& record, const Scenario& scenario);

}  // namespace qsmooth
