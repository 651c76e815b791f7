#pragma once

#include <vector>

#include "qsmooth/hybrid_engine.hpp"
#include "qsmooth/hybrid_field.hpp"
#include "qsmooth/truth_simulator.hpp"

namespace qsmooth {

/// Marginals and moments of a hybrid density at one time.
struct FilterEstimate {
  double t = 0.0;
  RVec p_x;        // classical density on the grid, sum p_x * cellvol = 1
  RVec x_mean;
  RMat x_cov;
  CMat rho_cond;   // quantum marginal, unit trace
  double log_likelihood = 0.0;
};

/// Which implementation of the block kernels a pass uses.
enum class KernelMode { parallel, serial };

/// rho0 * P(x_{t0} = x_k), normalised. Throws InvalidGrid when more than
/// 1e-6 of the prior mass lies off the grid.
HybridDensityField init_field(const HybridEngine& engine);

/// f <- Mix(K(f)): Lindblad step at every grid point, then classical
/// transition. Trace preserving.
void predict_step(const HybridEngine& engine, HybridDensityField& field, double dt,
                  KernelMode mode = KernelMode::parallel);

/// f <- M(dy) f M(dy)^dag, renormalised; the log of the normalisation is
/// added to log_weight. Throws NumericalError when the total trace
/// underflows.
void update_step(const HybridEngine& engine, HybridDensityField& field, const RVec& dy, double dt,
                 KernelMode mode = KernelMode::parallel);

/// One record row: update with dy, then predict, then renormalise. Same
/// result as update_step followed by predict_step, with the measurement and
/// the quantum step fused per grid point.
void filter_step(const HybridEngine& engine, HybridDensityField& field, const RVec& dy,
                 KernelMode mode = KernelMode::parallel);

FilterEstimate estimate(const HybridDensityField& field);

struct FilterOptions {
  std::size_t snapshot_stride = 0;  // 0: the scenario's effective stride
  bool keep_snapshots = true;
  KernelMode mode = KernelMode::parallel;
};

struct FilterResult {
  /// N + 1 estimates at t0, t0 + dt, ..., T. Entry i is conditioned on
  /// dy[0..i-1].
  std::vector<FilterEstimate> estimates;
  /// Unnormalised field at every stride-th step and at T.
  std::vector<HybridDensityField> snapshots;
  std::vector<std::size_t> snapshot_steps;
  HybridDensityField final_field;
};

/// Throws std::invalid_argument when the record's time grid does not match
/// the scenario, NumericalError (annotated with the step) on degeneracy.
FilterResult run_filter(const HybridEngine& engine, const TrajectoryRecord& record,
                        const FilterOptions& options = {});

/// Measurement-free prediction from the given field. Returns the current
/// estimate followed by one estimate per step up to the horizon.
std::vector<FilterEstimate> predict_ahead(const HybridEngine& engine, HybridDensityField field,
                                          double horizon, KernelMode mode = KernelMode::parallel);

/// Checks that the record shares the scenario's time grid and channel count.
void check_record(const Scenario& scenario, const TrajectoryRecord& record);

/// Stride-th steps plus the final step, ascending.
std::vector<std::size_t> snapshot_schedule(std::size_t steps, std::size_t stride);

}  // namespace qsmooth
