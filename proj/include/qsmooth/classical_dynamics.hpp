#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qsmooth/types.hpp"

namespace qsmooth {

/// Linear time-invariant form dx = A x dt + B dW, present when the model is
/// Gaussian-closed.
struct LinearDynamics {
  RMat drift;       // A, n x n
  RMat noise_gain;  // B, n x w
  RMat wiener_cov;  // Q, w x w
};

/// Ito SDE dx = A(x,t) dt + B(x,t) dW with E[dW dW^T] = Q(t) dt and a
/// Gaussian prior on x(t0).
struct ClassicalModel {
  using DriftFn = std::function<RVec(const RVec& x, double t)>;
  using GainFn = std::function<RMat(const RVec& x, double t)>;
  using CovFn = std::function<RMat(double t)>;

  int n = 1;
  int w = 1;
  DriftFn drift;
  GainFn noise_gain;
  CovFn wiener_cov;
  RVec initial_mean;
  RMat initial_cov;
  bool time_invariant = true;
  std::optional<LinearDynamics> linear;

  /// Throws std::invalid_argument on shape mismatches or a Q / prior
  /// covariance that is not positive semidefinite.
  void validate() const;

  /// B Q B^T at (x, t).
  RMat diffusion(const RVec& x, double t) const;

  static ClassicalModel linear_time_invariant(const RMat& a, const RMat& b, const RMat& q,
                                              const RVec& mean0, const RMat& cov0);
  static ClassicalModel ornstein_uhlenbeck(double lambda, double sigma, double mean0,
                                           double var0);
  static ClassicalModel random_walk(double sigma, double mean0, double var0);
  static ClassicalModel constant(double mean0, double var0);
};

struct GridAxis {
  double min = 0.0;
  double max = 1.0;
  std::size_t points = 3;

  double spacing() const { return (max - min) / static_cast<double>(points - 1); }
  double point(std::size_t i) const { return min + spacing() * static_cast<double>(i); }
};

/// Uniform tensor-product grid; the first axis varies fastest in the flat
/// index.
class ClassicalGrid {
 public:
  explicit ClassicalGrid(std::vector<GridAxis> axes);

  int dim() const noexcept { return static_cast<int>(axes_.size()); }
  std::size_t size() const noexcept { return size_; }
  const GridAxis& axis(int i) const { return axes_.at(static_cast<std::size_t>(i)); }
  const std::vector<GridAxis>& axes() const noexcept { return axes_; }
  double cell_volume() const noexcept { return cell_volume_; }

  RVec point(std::size_t flat) const;
  std::size_t flat_index(std::span<const std::size_t> multi) const;
  std::vector<std::size_t> multi_index(std::size_t flat) const;

  bool operator==(const ClassicalGrid& other) const;

 private:
  std::vector<GridAxis> axes_;
  std::size_t size_ = 0;
  double cell_volume_ = 1.0;
};

struct KernelEntry {
  std::uint32_t index;
  double weight;
};

/// Row-stochastic K x K transition matrix stored sparsely by rows (source
/// -> targets) and by columns (target <- sources).
class TransitionKernel {
 public:
  TransitionKernel(std::size_t size, std::vector<std::vector<KernelEntry>> rows,
                   std::size_t boundary_clamps);

  std::size_t size() const noexcept { return size_; }
  std::span<const KernelEntry> row(std::size_t source) const;
  std::span<const KernelEntry> column(std::size_t target) const;
  std::size_t boundary_clamps() const noexcept { return boundary_clamps_; }
  std::size_t nonzeros() const noexcept { return row_entries_.size(); }

  RMat dense() const;

 private:
  std::size_t size_;
  std::vector<std::size_t> row_offsets_;
  std::vector<KernelEntry> row_entries_;
  std::vector<std::size_t> col_offsets_;
  std::vector<KernelEntry> col_entries_;
  std::size_t boundary_clamps_;
};

/// x + A(x,t) dt + B(x,t) dW. Throws NumericalError naming the first
/// non-finite component.
RVec euler_maruyama_step(const ClassicalModel& model, const RVec& x, double t, double dt,
                         const RVec& dw);

/// Discretised P(x_{t+dt} | x_t) on the grid.
///
/// Per source point the target law N(x + A dt, B Q B^T dt) is placed on the
/// grid as follows (per axis when the diffusion is diagonal):
///   - sd >= 0.75 h: the Gaussian density sampled at grid points and
///     renormalised;
///   - 0 < sd < 0.75 h: the three-point stencil around the nearest node that
///     matches the mean and variance exactly;
///   - otherwise (no diffusion, or drift too large for a non-negative
///     three-point stencil): linear interpolation of the displaced mean.
/// Mass that would leave the grid is folded onto the boundary node and
/// counted in boundary_clamps().
TransitionKernel transition_kernel_matrix(const ClassicalModel& model, const ClassicalGrid& grid,
                                          double t, double dt);

/// Prior density P(x_t0) on the grid (sums * cell volume to 1). Throws
/// InvalidGrid when more than 1e-6 of the prior mass lies off the grid.
std::vector<double> prior_density(const ClassicalModel& model, const ClassicalGrid& grid);

/// Warnings for grids narrower than five prior standard deviations on
/// either side of the prior mean.
std::vector<std::string> grid_width_warnings(const ClassicalModel& model,
                                             const ClassicalGrid& grid);

/// Shares transition kernels between passes; keyed by (t, dt), with t
/// collapsed to 0 for time-invariant models.
class KernelCache {
 public:
  KernelCache(std::shared_ptr<const ClassicalModel> model,
              std::shared_ptr<const ClassicalGrid> grid);

  std::shared_ptr<const TransitionKernel> get(double t, double dt) const;

 private:
  std::shared_ptr<const ClassicalModel> model_;
  std::shared_ptr<const ClassicalGrid> grid_;
  mutable std::shared_mutex mutex_;
  mutable std::map<std::pair<double, double>, std::shared_ptr<const TransitionKernel>> cache_;
};

}  // namespace qsmooth
