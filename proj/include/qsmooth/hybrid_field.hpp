#pragma once

#include <memory>
#include <vector>

#include "qsmooth/classical_dynamics.hpp"
#include "qsmooth/types.hpp"

namespace qsmooth {

/// A d x d operator per grid point plus a log-scale ledger: the represented
/// (unnormalised) field is exp(log_weight) * blocks.
struct OperatorField {
  std::shared_ptr<const ClassicalGrid> grid;
  std::vector<CMat> blocks;
  double log_weight = 0.0;
  double t = 0.0;

  int dim() const { return blocks.empty() ? 0 : static_cast<int>(blocks.front().rows()); }
  std::size_t size() const noexcept { return blocks.size(); }
  /// sum_k Re tr[block_k]
  double trace_sum() const;
  /// Largest Hermiticity defect over all blocks.
  double hermiticity_defect() const;
  /// Smallest eigenvalue over all blocks.
  double min_eigenvalue() const;
};

/// Hybrid density f(x, t): tr f(x) is the classical density and
/// sum_x f(x) cellvol the quantum state. normalize() scales the total trace
/// sum_k tr f_k * cellvol to one and books the factor in log_weight.
struct HybridDensityField : OperatorField {
  double total_trace() const;
  void normalize();
};

/// Effect field g(x, t), the operator-valued likelihood of the future
/// record. normalize() scales the mean block trace to the Hilbert dimension
/// (so the final condition g = 1 is already normalised).
struct EffectField : OperatorField {
  void normalize();
};

}  // namespace qsmooth
