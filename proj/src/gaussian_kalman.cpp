#include "qsmooth/gaussian_kalman.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

#include "qsmooth/errors.hpp"

namespace qsmooth {

namespace {

RMat symmetrize(const RMat& m) { return 0.5 * (m + m.transpose()); }

double min_eig(const RMat& m) {
  Eigen::SelfAdjointEigenSolver<RMat> eig(symmetrize(m), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

void check_psd(const RMat& p, const char* what, std::size_t step) {
  const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
  if (!p.allFinite() || min_eig(p) < -1e-9 * scale) {
    std::ostringstream msg;
    msg << what << ": covariance lost positive semidefiniteness at step " << step
        << "; try a smaller dt";
    throw NumericalError(msg.str());
  }
}

void check_observations(const DiscreteLinearModel& model, const std::vector<RVec>& y) {
  for (const auto& v : y) {
    if (v.size() != model.Hd.rows()) {
      throw std::invalid_argument("observation size does not match the measurement matrix");
    }
  }
}

}  // namespace

void LinearGaussianModel::validate() const {
  const auto s = F.rows();
  if (F.cols() != s || N.rows() != s || N.cols() != s || H.cols() != s || m0.size() != s ||
      P0.rows() != s || P0.cols() != s) {
    throw std::invalid_argument("LinearGaussianModel: inconsistent shapes");
  }
  if (R.rows() != H.rows() || R.cols() != H.rows()) {
    throw std::invalid_argument("LinearGaussianModel: R does not match H");
  }
  if (min_eig(N) < -1e-12 * std::max(1.0, N.norm())) {
    throw std::invalid_argument("LinearGaussianModel: N is not positive semidefinite");
  }
  if (min_eig(P0) < -1e-12 * std::max(1.0, P0.norm())) {
    throw std::invalid_argument("LinearGaussianModel: P0 is not positive semidefinite");
  }
  Eigen::LLT<RMat> llt(symmetrize(R));
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("LinearGaussianModel: R is not positive definite");
  }
}

LinearGaussianModel derive_lg_model(const Scenario& scenario) {
  if (!scenario.oscillator) {
    throw UnsupportedScenario("derive_lg_model: not an oscillator-force scenario");
  }
  const OscillatorSpec& osc = *scenario.oscillator;
  if (scenario.quantum->has_dissipators()) {
    throw UnsupportedScenario("derive_lg_model: dissipators are not supported");
  }
  const ClassicalModel& cm = *scenario.classical;
  if (!cm.linear || !cm.time_invariant) {
    throw UnsupportedScenario(
        "derive_lg_model: classical dynamics must be linear with constant noise gain");
  }
  const MeasurementModel& meas = *scenario.measurement;
  if (meas.channel_count() != 1) {
    throw UnsupportedScenario("derive_lg_model: expected a single position readout");
  }

  const int n = cm.n;
  const int s = 2 + n;
  LinearGaussianModel m;
  m.classical_offset = 2;
  m.F = RMat::Zero(s, s);
  m.F(0, 1) = 1.0;
  m.F(1, 0) = -osc.omega * osc.omega;
  m.F(1, 2) = osc.coupling;
  m.F.bottomRightCorner(n, n) = cm.linear->drift;

  m.N = RMat::Zero(s, s);
  // position measurement decoheres momentum: (hbar^2 / 8R) d^2/dp^2 in phase space
  m.N(1, 1) = osc.hbar * osc.hbar * meas.noise_cov_inverse()(0, 0) / 4.0;
  m.N.bottomRightCorner(n, n) =
      cm.linear->noise_gain * cm.linear->wiener_cov * cm.linear->noise_gain.transpose();

  m.H = RMat::Zero(1, s);
  m.H(0, 0) = 1.0;
  m.R = meas.noise_cov();

  // symmetric-ordered moments of rho0, independent of the classical prior
  const FockOperators ops = build_fock_operators(osc.fock_dim, osc.omega, osc.hbar);
  const CMat& rho = scenario.rho0;
  const double mq = (ops.q * rho).trace().real();
  const double mp = (ops.p * rho).trace().real();
  const double qq = (ops.q * ops.q * rho).trace().real() - mq * mq;
  const double pp = (ops.p * ops.p * rho).trace().real() - mp * mp;
  const double qp = (0.5 * (ops.q * ops.p + ops.p * ops.q) * rho).trace().real() - mq * mp;
  m.m0 = RVec::Zero(s);
  m.m0(0) = mq;
  m.m0(1) = mp;
  m.m0.tail(n) = cm.initial_mean;
  m.P0 = RMat::Zero(s, s);
  m.P0(0, 0) = qq;
  m.P0(1, 1) = pp;
  m.P0(0, 1) = m.P0(1, 0) = qp;
  m.P0.bottomRightCorner(n, n) = cm.initial_cov;
  m.validate();
  return m;
}

DiscreteLinearModel euler_discretize(const LinearGaussianModel& model, double dt) {
  model.validate();
  const auto s = model.state_dim();
  DiscreteLinearModel d;
  d.Phi = RMat::Identity(s, s) + model.F * dt;
  d.Q = model.N * dt;
  d.Hd = model.H * dt;
  d.Rd = model.R * dt;
  d.m0 = model.m0;
  d.P0 = model.P0;
  return d;
}

DiscreteLinearModel exact_discretize(const LinearGaussianModel& model, double dt) {
  model.validate();
  const auto s = model.state_dim();
  RMat block = RMat::Zero(2 * s, 2 * s);
  block.topLeftCorner(s, s) = -model.F * dt;
  block.topRightCorner(s, s) = model.N * dt;
  block.bottomRightCorner(s, s) = model.F.transpose() * dt;
  const RMat e = block.exp();
  DiscreteLinearModel d;
  d.Phi = e.bottomRightCorner(s, s).transpose();
  d.Q = symmetrize(d.Phi * e.topRightCorner(s, s));
  d.Hd = model.H * dt;
  d.Rd = model.R * dt;
  d.m0 = model.m0;
  d.P0 = model.P0;
  return d;
}

std::vector<GaussianMoments> kalman_forward(const DiscreteLinearModel& model,
                                            const std::vector<RVec>& y, double t0, double dt) {
  check_observations(model, y);
  const auto s = model.Phi.rows();
  const RMat eye = RMat::Identity(s, s);
  std::vector<GaussianMoments> out;
  out.reserve(y.size() + 1);
  RVec m = model.m0;
  RMat P = model.P0;
  double loglik = 0.0;
  const Eigen::LLT<RMat> r_llt(model.Rd);
  out.push_back({t0, m, P, loglik});
  for (std::size_t i = 0; i < y.size(); ++i) {
    const RMat S = model.Hd * P * model.Hd.transpose() + model.Rd;
    const Eigen::LLT<RMat> s_llt(S);
    const RMat K = s_llt.solve(model.Hd * P).transpose();
    const RVec innovation = y[i] - model.Hd * m;
    // log N(y; Hd m, S) - log N(y; 0, Rd)
    double log_det_s = 0.0, log_det_r = 0.0;
    for (Eigen::Index j = 0; j < S.rows(); ++j) {
      log_det_s += 2.0 * std::log(s_llt.matrixL()(j, j));
      log_det_r += 2.0 * std::log(r_llt.matrixL()(j, j));
    }
    loglik += -0.5 * (innovation.dot(s_llt.solve(innovation)) + log_det_s) +
              0.5 * (y[i].dot(r_llt.solve(y[i])) + log_det_r);
    const RMat IKH = eye - K * model.Hd;
    m += K * innovation;
    P = IKH * P * IKH.transpose() + K * model.Rd * K.transpose();
    m = model.Phi * m;
    P = symmetrize(model.Phi * P * model.Phi.transpose() + model.Q);
    check_psd(P, "kalman_forward", i);
    out.push_back({t0 + static_cast<double>(i + 1) * dt, m, P, loglik});
  }
  return out;
}

std::vector<InformationPair> information_backward(const DiscreteLinearModel& model,
                                                  const std::vector<RVec>& y, double t0,
                                                  double dt) {
  check_observations(model, y);
  const auto s = model.Phi.rows();
  const RMat eye = RMat::Identity(s, s);
  const Eigen::LLT<RMat> r_llt(model.Rd);
  const RMat info_gain = r_llt.solve(model.Hd).transpose();  // Hd^T Rd^-1
  const RMat info_h = info_gain * model.Hd;

  std::vector<InformationPair> out(y.size() + 1);
  RMat Y = RMat::Zero(s, s);
  RVec z = RVec::Zero(s);
  out[y.size()] = {t0 + static_cast<double>(y.size()) * dt, Y, z};
  for (std::size_t i = y.size(); i-- > 0;) {
    // through the process noise, then back through the transition
    const Eigen::PartialPivLU<RMat> lu(eye + Y * model.Q);
    const RMat Y_tilde = symmetrize(lu.solve(Y));
    const RVec z_tilde = lu.solve(z);
    Y = symmetrize(model.Phi.transpose() * Y_tilde * model.Phi + info_h);
    z = model.Phi.transpose() * z_tilde + info_gain * y[i];
    check_psd(Y, "information_backward", i);
    out[i] = {t0 + static_cast<double>(i) * dt, Y, z};
  }
  return out;
}

GaussianMoments mfp_combine(const GaussianMoments& forward, const InformationPair& backward) {
  const auto s = forward.mean.size();
  if (forward.cov.rows() != s || forward.cov.cols() != s || backward.Y.rows() != s ||
      backward.Y.cols() != s || backward.z.size() != s) {
    throw std::invalid_argument("mfp_combine: shape mismatch");
  }
  const Eigen::LLT<RMat> llt(symmetrize(forward.cov));
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("mfp_combine: forward covariance is singular");
  }
  // (P^-1 + Y)^-1 = (1 + P Y)^-1 P keeps P^-1 out of the arithmetic
  const Eigen::PartialPivLU<RMat> lu(RMat::Identity(s, s) + forward.cov * backward.Y);
  GaussianMoments out;
  out.t = forward.t;
  out.log_likelihood = forward.log_likelihood;
  out.cov = symmetrize(lu.solve(forward.cov));
  out.mean = lu.solve(forward.mean + forward.cov * backward.z);
  return out;
}

std::vector<GaussianMoments> kalman_bucy_forward(const LinearGaussianModel& model,
                                                 const TrajectoryRecord& record) {
  record.validate();
  return kalman_forward(euler_discretize(model, record.dt), record.dy, record.t0, record.dt);
}

std::vector<InformationPair> kalman_bucy_backward(const LinearGaussianModel& model,
                                                  const TrajectoryRecord& record) {
  record.validate();
  return information_backward(euler_discretize(model, record.dt), record.dy, record.t0,
                              record.dt);
}

std::vector<GaussianMoments> kalman_bucy_smooth(const LinearGaussianModel& model,
                                                const TrajectoryRecord& record) {
  const auto fwd = kalman_bucy_forward(model, record);
  const auto bwd = kalman_bucy_backward(model, record);
  std::vector<GaussianMoments> out;
  out.reserve(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) out.push_back(mfp_combine(fwd[i], bwd[i]));
  return out;
}

RMat riccati_residual(const LinearGaussianModel& model, const RMat& P) {
  const RMat gain = P * model.H.transpose() * model.R.inverse() * model.H * P;
  return model.F * P + P * model.F.transpose() + model.N - gain;
}

GaussianMoments classical_block(const LinearGaussianModel& model, const GaussianMoments& s) {
  const auto n = s.mean.size() - model.classical_offset;
  GaussianMoments out;
  out.t = s.t;
  out.mean = s.mean.segment(model.classical_offset, n);
  out.cov = s.cov.block(model.classical_offset, model.classical_offset, n, n);
  return out;
}

}  // namespace qsmooth
