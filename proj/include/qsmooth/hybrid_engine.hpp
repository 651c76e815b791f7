#pragma once

#include <memory>
#include <vector>

#include "qsmooth/classical_dynamics.hpp"
#include "qsmooth/operator_core.hpp"
#include "qsmooth/scenario.hpp"

namespace qsmooth {

/// Per-scenario precomputation shared by the forward and backward passes:
/// the grid, the transition kernel cache and one quantum step propagator
/// per grid point. Immutable after construction.
class HybridEngine {
 public:
  explicit HybridEngine(const Scenario& scenario);

  const Scenario& scenario() const noexcept { return scenario_; }
  const ClassicalGrid& grid() const noexcept { return *scenario_.grid; }
  std::shared_ptr<const ClassicalGrid> grid_ptr() const noexcept { return scenario_.grid; }
  const MeasurementModel& measurement() const noexcept { return *scenario_.measurement; }
  double dt() const noexcept { return scenario_.dt; }
  int dim() const noexcept { return scenario_.quantum->dim(); }

  const TransitionKernel& kernel(double t) const;
  const std::vector<StepPropagator>& propagators() const noexcept { return propagators_; }

 private:
  Scenario scenario_;
  KernelCache kernels_;
  std::vector<StepPropagator> propagators_;
};

}  // namespace qsmooth
