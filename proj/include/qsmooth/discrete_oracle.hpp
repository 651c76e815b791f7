#pragma once

#include <functional>
#include <vector>

#include "qsmooth/hybrid_engine.hpp"
#include "qsmooth/truth_simulator.hpp"

namespace qsmooth {

// Exact discrete-time reference for tiny instances: every object is an
// explicit matrix and every sum an explicit enumeration. Operators are
// vectorised column-stacked, vec(A X B) = (B^T kron A) vec(X), and
// superoperator adjoints are conjugate transposes.

/// vec(A X B) as a d^2 x d^2 matrix.
CMat sandwich_superoperator(const CMat& left, const CMat& right);
CMat vectorize(const CMat& m);
CMat unvectorize(const CMat& v, int dim);

/// One step maps f_i to f_{i+1}(j) = sum_k T[k, j] S_{i,k}(M_i f_i(k) M_i^dag).
struct DiscreteScenario {
  static constexpr std::size_t kMaxSteps = 6;
  static constexpr int kMaxGrid = 4;
  static constexpr int kMaxDim = 3;

  int grid_points = 0;
  int dim = 0;
  RMat transition;  // K x K, rows sum to 1
  RVec prior;       // K probabilities
  CMat rho0;
  /// propagators[i][k]: step-i superoperator at grid point k. A single
  /// entry in the outer vector is reused for every step.
  std::vector<std::vector<CMat>> propagators;
  /// Kraus operator of step i for increment dy.
  std::function<CMat(std::size_t step, const RVec& dy)> kraus;

  const CMat& propagator(std::size_t step, int k) const;
  /// Throws std::invalid_argument on broken invariants and TooLarge when the
  /// instance (with the given record length) exceeds the size bounds.
  void validate(std::size_t steps) const;
};

/// f_tau for tau = 0..L, summing rho(path) P(path) over all K^(tau+1)
/// classical paths x_0..x_tau. Unnormalised.
std::vector<std::vector<CMat>> enumerate_forward(const DiscreteScenario& ds,
                                                 const std::vector<RVec>& record);

/// The same quantity by iterating the one-step map on d^2 K vectors.
std::vector<std::vector<CMat>> recursive_forward(const DiscreteScenario& ds,
                                                 const std::vector<RVec>& record);

/// E_tau for tau = 0..L by enumerating future paths x_tau..x_L, applying the
/// adjoint steps in reverse order to the final identity.
std::vector<std::vector<CMat>> enumerate_effect(const DiscreteScenario& ds,
                                                const std::vector<RVec>& record);

/// sum_k Re tr[E(k) f(k)].
double oracle_pairing(const std::vector<CMat>& effect, const std::vector<CMat>& forward);

/// h_tau(k) proportional to Re tr[E_tau(k) f_tau(k)], as probabilities.
std::vector<RVec> oracle_smooth(const DiscreteScenario& ds, const std::vector<RVec>& record);

/// Posterior of x_tau by weighting every full path with its prior
/// probability and the trace of its conditional state after the whole
/// record. Shares no code with the effect construction.
std::vector<RVec> brute_force_smooth(const DiscreteScenario& ds, const std::vector<RVec>& record);

/// The discrete model the grid pipeline actually runs: dense kernel, each
/// grid point's step superoperator, the measurement Kraus operator and the
/// normalised prior field.
DiscreteScenario discrete_from_engine(const HybridEngine& engine);

/// Two-level system with a static classical parameter on two grid points,
/// driven by a smooth record so the continuous pipeline has an exact
/// oracle: H(x) = (gap/2) sz + tunnel x sx, readout C = sz, noise R. The
/// oracle advances by exp(step * G) with
/// G = L_x + (ydot / 2R)(C . + . C) - (1 / 4R)(C^2 . + . C^2),
/// where ydot is the record rate on that oracle step. This is the limit of
/// the pipeline's one-step map on a record of bounded variation, where the
/// second-order term of M(dy) contributes only its -dt C^2 / 8R part.
struct MatchedInstance {
  double gap = 1.0;
  double tunnel = 0.8;
  double R = 0.5;
  double oracle_step = 0.1;
  std::vector<double> rates = {0.9, -0.6, 0.4};  // ydot per oracle step
  double x_spread = 0.35;                         // prior sd (grid at +-1)
};

Scenario matched_scenario(const MatchedInstance& inst, double dt);
/// Record at the given dt: each oracle step split into equal increments.
TrajectoryRecord matched_record(const MatchedInstance& inst, double dt);
DiscreteScenario matched_oracle(const MatchedInstance& inst);
/// The oracle's record: one (unused) increment per oracle step.
std::vector<RVec> matched_oracle_record(const MatchedInstance& inst);

struct LadderRung {
  double dt = 0.0;
  double error = 0.0;  // max over oracle times of the L1 distance between smoothing laws
};

struct ConvergenceReport {
  std::vector<LadderRung> rungs;
  std::vector<double> orders;  // log2 error ratios between consecutive rungs
  double fitted_order = 0.0;   // least-squares slope of log error vs log dt
};

/// Runs the smoother at each dt and compares against the oracle at the
/// oracle step boundaries. Each dt must divide the oracle step.
ConvergenceReport convergence_ladder(const MatchedInstance& inst, const std::vector<double>& dts);

/// Largest deviation between the grid smoother and the oracle built from
/// the pipeline's own one-step factors on a random record of `steps` steps.
/// Agreement is exact up to rounding.
double exact_factor_check(const MatchedInstance& inst, double dt, std::size_t steps,
                          std::uint64_t seed = 1);

}  // namespace qsmooth
