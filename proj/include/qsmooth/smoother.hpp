#pragma once

#include <vector>

#include "qsmooth/backward_filter.hpp"
#include "qsmooth/forward_filter.hpp"

namespace qsmooth {

/// Posterior density of the classical state at one time.
struct SmoothingDensity {
  double t = 0.0;
  RVec h;  // sum h * cellvol = 1
  RVec x_mean;
  RMat x_cov;
};

/// h(x_k) proportional to Re tr[g(x_k) f(x_k)], normalised over the grid.
/// Throws std::invalid_argument on mismatched grids, dimensions or times and
/// NumericalError when the overlap vanishes everywhere or the discarded
/// imaginary part is not round-off.
SmoothingDensity combine(const HybridDensityField& f, const EffectField& g);

/// Moments of a grid density by midpoint summation.
void grid_moments(const ClassicalGrid& grid, const RVec& density, RVec& mean, RMat& cov);

struct SmoothOptions {
  std::size_t stride = 0;               // output every stride-th step (0: scenario default)
  std::size_t checkpoint_interval = 0;  // forward checkpoints (0: about sqrt(N))
  // Keep the forward fields at the output steps instead of recomputing
  // segments when they fit in this many bytes.
  std::size_t direct_budget_bytes = std::size_t{512} << 20;
  KernelMode mode = KernelMode::parallel;
};

struct SmoothResult {
  /// Outputs at steps 0, stride, 2 stride, ... and N, ascending.
  std::vector<SmoothingDensity> smoothed;
  std::vector<std::size_t> steps;
  /// Forward estimates at every step (the filter for smooth_series, the
  /// measurement-free prediction for retrodict).
  std::vector<FilterEstimate> forward;
  /// log of the record likelihood from the <g, f> pairing at t0.
  double log_likelihood = 0.0;
  /// Largest |Im tr[g f]| relative to the largest |Re tr[g f]| seen.
  double max_imag_residue = 0.0;
};

/// Forward filter and backward effect pass combined at every output step.
/// Memory stays at O(sqrt(N)) fields: the forward pass keeps checkpoints
/// and each segment is recomputed during the backward sweep.
SmoothResult smooth_series(const HybridEngine& engine, const TrajectoryRecord& record,
                           const SmoothOptions& options = {});

/// The effect field combined with the prior propagated without measurements,
/// i.e. smoothing with no past record.
SmoothResult retrodict(const HybridEngine& engine, const TrajectoryRecord& record,
                       const SmoothOptions& options = {});

}  // namespace qsmooth
