#pragma once

#include <functional>
#include <vector>

#include "qsmooth/types.hpp"

namespace qsmooth {

/// Ladder, quadrature and identity operators of a harmonic oscillator
/// truncated to the lowest `dim` Fock states.
struct FockOperators {
  CMat a;
  CMat a_dag;
  CMat q;
  CMat p;
  CMat identity;
};

FockOperators build_fock_operators(int dim, double omega, double hbar);

bool is_hermitian(const CMat& op, double tol = 1e-12);
double hermiticity_defect(const CMat& op);

/// Closed-system Hamiltonian family H(x) plus a fixed set of Lindblad jump
/// operators. Immutable after construction.
class QuantumModel {
 public:
  using HamiltonianFn = std::function<CMat(const RVec& x)>;

  QuantumModel(int dim, HamiltonianFn hamiltonian,
               std::vector<CMat> dissipators = {}, double hbar = 1.0);

  int dim() const noexcept { return dim_; }
  double hbar() const noexcept { return hbar_; }
  const std::vector<CMat>& dissipators() const noexcept { return dissipators_; }
  bool has_dissipators() const noexcept { return !dissipators_.empty(); }

  /// Evaluates H(x); throws std::invalid_argument when the result has the
  /// wrong shape or is not Hermitian.
  CMat hamiltonian(const RVec& x) const;

  /// sum_k L_k^dag L_k, cached.
  const CMat& jump_sum() const noexcept { return jump_sum_; }

 private:
  int dim_;
  HamiltonianFn hamiltonian_;
  std::vector<CMat> dissipators_;
  double hbar_;
  CMat jump_sum_;
};

/// L evaluated at a fixed classical point. Cheap to copy around.
struct LindbladGenerator {
  CMat hamiltonian;
  double hbar = 1.0;
  std::vector<CMat> jumps;
  CMat jump_sum;

  static LindbladGenerator at(const QuantumModel& model, const RVec& x);

  CMat apply(const CMat& rho) const;
  CMat apply_adjoint(const CMat& e) const;
  int dim() const { return static_cast<int>(hamiltonian.rows()); }
};

/// d rho/dt = -(i/hbar)[H(x), rho] + sum_k (L rho L^dag - {L^dag L, rho}/2)
CMat lindblad_apply(const QuantumModel& model, const RVec& x, const CMat& rho);

/// Heisenberg-picture adjoint: tr[e L(rho)] = tr[L*(e) rho].
CMat lindblad_adjoint_apply(const QuantumModel& model, const RVec& x, const CMat& e);

/// Gaussian continuous-measurement model in the (C, R) parameterisation.
class MeasurementModel {
 public:
  /// Throws std::invalid_argument when R is not symmetric positive definite
  /// or its size does not match the channel count.
  MeasurementModel(std::vector<CMat> channels, RMat noise_cov);

  int channel_count() const noexcept { return static_cast<int>(channels_.size()); }
  int dim() const noexcept { return dim_; }
  const std::vector<CMat>& channels() const noexcept { return channels_; }
  const RMat& noise_cov() const noexcept { return noise_cov_; }
  const RMat& noise_cov_inverse() const noexcept { return noise_cov_inv_; }

  /// sum_{mu,nu} C_mu^dag (R^-1)_{mu nu} C_nu
  const CMat& quadratic_term() const noexcept { return quadratic_; }

  /// (1/2) tr[(C + C^dag) rho] per channel: the drift of dy per unit time.
  RVec expected_signal(const CMat& rho) const;

 private:
  std::vector<CMat> channels_;
  RMat noise_cov_;
  RMat noise_cov_inv_;
  CMat quadratic_;
  int dim_ = 0;
};

/// M(dy) = 1 + (1/2) dy^T R^-1 C - (dt/8) C^dag^T R^-1 C
///         + (1/8) [(dy^T R^-1 C)^2 - dt C^T R^-1 C].
/// The Gaussian reference density is left out; filters account for it in a
/// log-weight ledger.
CMat measurement_kraus(const MeasurementModel& meas, const RVec& dy, double dt);

/// Classical RK4 step of d rho/dt = L rho (and its exact adjoint, which is
/// the same polynomial in L*).
CMat lindblad_rk4_step(const LindbladGenerator& gen, const CMat& rho, double dt);
CMat lindblad_rk4_adjoint_step(const LindbladGenerator& gen, const CMat& e, double dt);

/// One-step quantum propagator K(x) = exp(dt L(x)) at a fixed grid point.
///
/// Without dissipators the step is the exact unitary conjugation
/// U rho U^dag with U = exp(-i H dt / hbar). With dissipators it is the
/// fourth-order Taylor/RK4 polynomial in dt L, whose adjoint is the same
/// polynomial in dt L*, so forward and adjoint steps pair exactly.
class StepPropagator {
 public:
  StepPropagator(LindbladGenerator gen, double dt);

  CMat apply(const CMat& rho) const;
  CMat apply_adjoint(const CMat& e) const;

  bool is_unitary() const noexcept { return unitary_; }
  /// Only meaningful when is_unitary().
  const CMat& unitary() const noexcept { return u_; }
  const LindbladGenerator& generator() const noexcept { return gen_; }
  double dt() const noexcept { return dt_; }

  /// d^2 x d^2 column-stacked matrix of this step.
  CMat superoperator() const;

 private:
  LindbladGenerator gen_;
  double dt_;
  bool unitary_;
  CMat u_;
};

}  // namespace qsmooth
