#include "qsmooth/operator_core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qsmooth {

namespace {

const Complex kI{0.0, 1.0};

void require_square(const CMat& m, int dim, const char* what) {
  if (m.rows() != dim || m.cols() != dim) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(dim) + "x" +
                                std::to_string(dim) + ", got " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
  }
}

}  // namespace

FockOperators build_fock_operators(int dim, double omega, double hbar) {
  if (dim < 2) throw std::invalid_argument("build_fock_operators: dim must be >= 2");
  if (!(omega > 0.0) || !(hbar > 0.0)) {
    throw std::invalid_argument("build_fock_operators: omega and hbar must be positive");
  }
  FockOperators ops;
  ops.a = CMat::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) ops.a(n - 1, n) = std::sqrt(static_cast<double>(n));
  ops.a_dag = ops.a.adjoint();
  ops.q = std::sqrt(hbar / (2.0 * omega)) * (ops.a + ops.a_dag);
  ops.p = kI * std::sqrt(hbar * omega / 2.0) * (ops.a_dag - ops.a);
  ops.identity = CMat::Identity(dim, dim);
  return ops;
}

double hermiticity_defect(const CMat& op) {
  if (op.size() == 0) return 0.0;
  return (op - op.adjoint()).cwiseAbs().maxCoeff();
}

bool is_hermitian(const CMat& op, double tol) {
  return op.rows() == op.cols() && hermiticity_defect(op) <= tol;
}

QuantumModel::QuantumModel(int dim, HamiltonianFn hamiltonian, std::vector<CMat> dissipators,
                           double hbar)
    : dim_(dim),
      hamiltonian_(std::move(hamiltonian)),
      dissipators_(std::move(dissipators)),
      hbar_(hbar) {
  if (dim < 2) throw std::invalid_argument("QuantumModel: dim must be >= 2");
  if (!(hbar > 0.0)) throw std::invalid_argument("QuantumModel: hbar must be positive");
  if (!hamiltonian_) throw std::invalid_argument("QuantumModel: missing Hamiltonian");
  jump_sum_ = CMat::Zero(dim, dim);
  for (const auto& l : dissipators_) {
    require_square(l, dim, "QuantumModel dissipator");
    if (!l.allFinite()) throw std::invalid_argument("QuantumModel: non-finite dissipator");
    jump_sum_.noalias() += l.adjoint() * l;
  }
}

CMat QuantumModel::hamiltonian(const RVec& x) const {
  CMat h = hamiltonian_(x);
  require_square(h, dim_, "QuantumModel Hamiltonian");
  if (!h.allFinite()) throw std::invalid_argument("QuantumModel: non-finite Hamiltonian");
  // Relative tolerance: large-x Hamiltonians carry O(|x|) rounding.
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if (hermiticity_defect(h) > 1e-12 * scale) {
    throw std::invalid_argument("QuantumModel: Hamiltonian is not Hermitian");
  }
  return h;
}

LindbladGenerator LindbladGenerator::at(const QuantumModel& model, const RVec& x) {
  return LindbladGenerator{model.hamiltonian(x), model.hbar(), model.dissipators(),
                           model.jump_sum()};
}

CMat LindbladGenerator::apply(const CMat& rho) const {
  // -(i/hbar)(H rho - rho H); rho H = (H rho)^dag only for Hermitian rho, so
  // keep both products to stay valid on arbitrary inputs.
  CMat out = (-kI / hbar) * (hamiltonian * rho - rho * hamiltonian);
  if (!jumps.empty()) {
    for (const auto& l : jumps) out.noalias() += l * rho * l.adjoint();
    out.noalias() -= 0.5 * (jump_sum * rho + rho * jump_sum);
  }
  return out;
}

CMat LindbladGenerator::apply_adjoint(const CMat& e) const {
  CMat out = (kI / hbar) * (hamiltonian * e - e * hamiltonian);
  if (!jumps.empty()) {
    for (const auto& l : jumps) out.noalias() += l.adjoint() * e * l;
    out.noalias() -= 0.5 * (jump_sum * e + e * jump_sum);
  }
  return out;
}

CMat lindblad_apply(const QuantumModel& model, const RVec& x, const CMat& rho) {
  require_square(rho, model.dim(), "lindblad_apply rho");
  return LindbladGenerator::at(model, x).apply(rho);
}

CMat lindblad_adjoint_apply(const QuantumModel& model, const RVec& x, const CMat& e) {
  require_square(e, model.dim(), "lindblad_adjoint_apply e");
  return LindbladGenerator::at(model, x).apply_adjoint(e);
}

MeasurementModel::MeasurementModel(std::vector<CMat> channels, RMat noise_cov)
    : channels_(std::move(channels)), noise_cov_(std::move(noise_cov)) {
  if (channels_.empty()) throw std::invalid_argument("MeasurementModel: no channels");
  const auto m = static_cast<Eigen::Index>(channels_.size());
  if (noise_cov_.rows() != m || noise_cov_.cols() != m) {
    throw std::invalid_argument("MeasurementModel: R must be " + std::to_string(m) + "x" +
                                std::to_string(m));
  }
  if ((noise_cov_ - noise_cov_.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, noise_cov_.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("MeasurementModel: R is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<RMat> eig(noise_cov_);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw std::invalid_argument("MeasurementModel: R is not positive definite");
  }
  dim_ = static_cast<int>(channels_.front().rows());
  for (const auto& c : channels_) require_square(c, dim_, "MeasurementModel channel");
  noise_cov_inv_ = noise_cov_.inverse();
  noise_cov_inv_ = 0.5 * (noise_cov_inv_ + noise_cov_inv_.transpose()).eval();
  quadratic_ = CMat::Zero(dim_, dim_);
  for (Eigen::Index mu = 0; mu < m; ++mu) {
    for (Eigen::Index nu = 0; nu < m; ++nu) {
      quadratic_.noalias() += noise_cov_inv_(mu, nu) * channels_[mu].adjoint() * channels_[nu];
    }
  }
}

RVec MeasurementModel::expected_signal(const CMat& rho) const {
  RVec out(channels_.size());
  for (std::size_t mu = 0; mu < channels_.size(); ++mu) {
    const CMat& c = channels_[mu];
    out(static_cast<Eigen::Index>(mu)) = 0.5 * ((c + c.adjoint()) * rho).trace().real();
  }
  return out;
}

CMat measurement_kraus(const MeasurementModel& meas, const RVec& dy, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("measurement_kraus: dt must be positive");
  if (dy.size() != meas.channel_count()) {
    throw std::invalid_argument("measurement_kraus: dy has wrong length");
  }
  if (!dy.allFinite()) throw std::invalid_argument("measurement_kraus: non-finite dy");
  const int d = meas.dim();
  const RVec w = meas.noise_cov_inverse() * dy;  // R symmetric: dy^T R^-1 = (R^-1 dy)^T
  CMat m = CMat::Identity(d, d);
  for (int nu = 0; nu < meas.channel_count(); ++nu) m += 0.5 * w(nu) * meas.channels()[nu];
  m -= (dt / 8.0) * meas.quadratic_term();
  // Second-order Ito term (1/8)[(w.C)^2 - dt sum R^-1 C C]. It has zero mean
  // under the reference measure and lifts strong convergence from 1/2 to 1.
  CMat wc = CMat::Zero(d, d);
  for (int nu = 0; nu < meas.channel_count(); ++nu) wc += w(nu) * meas.channels()[nu];
  m += 0.125 * (wc * wc);
  const RMat& rinv = meas.noise_cov_inverse();
  for (int mu = 0; mu < meas.channel_count(); ++mu) {
    for (int nu = 0; nu < meas.channel_count(); ++nu) {
      m -= (0.125 * dt * rinv(mu, nu)) * (meas.channels()[mu] * meas.channels()[nu]);
    }
  }
  return m;
}

CMat lindblad_rk4_step(const LindbladGenerator& gen, const CMat& rho, double dt) {
  // For a linear generator RK4 reduces to the degree-4 Taylor polynomial.
  CMat term = rho;
  CMat out = rho;
  const double coeff[4] = {1.0, 1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0};
  for (double c : coeff) {
    term = (c * dt) * gen.apply(term);
    out += term;
  }
  return out;
}

CMat lindblad_rk4_adjoint_step(const LindbladGenerator& gen, const CMat& e, double dt) {
  CMat term = e;
  CMat out = e;
  const double coeff[4] = {1.0, 1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0};
  for (double c : coeff) {
    term = (c * dt) * gen.apply_adjoint(term);
    out += term;
  }
  return out;
}

StepPropagator::StepPropagator(LindbladGenerator gen, double dt)
    : gen_(std::move(gen)), dt_(dt), unitary_(gen_.jumps.empty()) {
  if (!(dt > 0.0)) throw std::invalid_argument("StepPropagator: dt must be positive");
  if (unitary_) {
    Eigen::SelfAdjointEigenSolver<CMat> eig(gen_.hamiltonian);
    if (eig.info() != Eigen::Success) {
      throw std::runtime_error("StepPropagator: eigendecomposition failed");
    }
    const RVec& energies = eig.eigenvalues();
    CVec phases(energies.size());
    for (Eigen::Index i = 0; i < energies.size(); ++i) {
      phases(i) = std::exp(-kI * energies(i) * dt / gen_.hbar);
    }
    u_ = eig.eigenvectors() * phases.asDiagonal() * eig.eigenvectors().adjoint();
  }
}

CMat StepPropagator::apply(const CMat& rho) const {
  if (unitary_) return u_ * rho * u_.adjoint();
  return lindblad_rk4_step(gen_, rho, dt_);
}

CMat StepPropagator::apply_adjoint(const CMat& e) const {
  if (unitary_) return u_.adjoint() * e * u_;
  return lindblad_rk4_adjoint_step(gen_, e, dt_);
}

CMat StepPropagator::superoperator() const {
  const int d = gen_.dim();
  CMat super(d * d, d * d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) {
      CMat basis = CMat::Zero(d, d);
      basis(i, j) = 1.0;
      const CMat image = apply(basis);
      super.col(j * d + i) = Eigen::Map<const CVec>(image.data(), d * d);
    }
  }
  return super;
}

}  // namespace qsmooth
