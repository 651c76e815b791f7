#pragma once

#include <vector>

#include "qsmooth/forward_filter.hpp"

namespace qsmooth {

/// Identity blocks at t = T, log_weight 0.
EffectField init_effect(const HybridEngine& engine);

/// Undoes record row with increment dy, in the adjoint order of the forward
/// step: adjoint mixing g_k <- sum_j K[k -> j] g_j, then the adjoint quantum
/// step, then g <- M(dy)^dag g M(dy). Renormalised into log_weight; t moves
/// back by dt.
void backward_step(const HybridEngine& engine, EffectField& field, const RVec& dy, double dt,
                   KernelMode mode = KernelMode::parallel);

struct BackwardResult {
  /// Effect fields at the forward snapshot steps, ascending in time.
  std::vector<EffectField> snapshots;
  std::vector<std::size_t> snapshot_steps;
};

BackwardResult run_backward(const HybridEngine& engine, const TrajectoryRecord& record,
                            const FilterOptions& options = {});

/// sum_k Re tr[g_k f_k] * cellvol. The largest discarded imaginary part is
/// written to max_imag when given.
double pairing(const OperatorField& g, const OperatorField& f, double* max_imag = nullptr);

/// log of the pairing with both log-weight ledgers added back: the log
/// likelihood of the whole record when f and g sit at the same time.
double log_pairing(const EffectField& g, const HybridDensityField& f);

}  // namespace qsmooth
