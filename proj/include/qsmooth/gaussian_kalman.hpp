#pragma once

#include <vector>

#include "qsmooth/scenario.hpp"
#include "qsmooth/truth_simulator.hpp"

namespace qsmooth {

/// ds = F s dt + dW_s with E[dW dW^T] = N dt, dy = H s dt + dv with
/// E[dv dv^T] = R dt, s ~ N(m0, P0). For the oscillator-force scenarios the
/// state is s = (q, p, x_1..x_n).
struct LinearGaussianModel {
  RMat F;
  RMat N;
  RMat H;
  RMat R;
  RVec m0;
  RMat P0;
  int classical_offset = 2;  // index of x_1 in s

  int state_dim() const { return static_cast<int>(F.rows()); }
  /// Throws std::invalid_argument on shape mismatches, N not PSD or R not PD.
  void validate() const;
};

/// Phase-space model of an oscillator-force scenario: dq = p dt,
/// dp = (-omega^2 q + coupling x_1) dt + back-action noise with rate
/// hbar^2 R^-1 / 4, dx = A x dt + B dW. Throws UnsupportedScenario for
/// anything else (dissipators, nonlinear or time-varying classical dynamics,
/// other readouts).
LinearGaussianModel derive_lg_model(const Scenario& scenario);

/// s_{i+1} = Phi s_i + w_i, w ~ N(0, Q); y_i = Hd s_i + v_i, v ~ N(0, Rd).
struct DiscreteLinearModel {
  RMat Phi;
  RMat Q;
  RMat Hd;
  RMat Rd;
  RVec m0;
  RMat P0;
};

/// The streaming filters' discretisation: Phi = 1 + F dt, Q = N dt,
/// Hd = H dt, Rd = R dt (y_i = dy_i).
DiscreteLinearModel euler_discretize(const LinearGaussianModel& model, double dt);
/// Phi = exp(F dt), Q = int_0^dt exp(F s) N exp(F^T s) ds (Van Loan); the
/// measurement is discretised as in euler_discretize.
DiscreteLinearModel exact_discretize(const LinearGaussianModel& model, double dt);

struct GaussianMoments {
  double t = 0.0;
  RVec mean;
  RMat cov;
  /// Log likelihood ratio of the observations so far against zero-mean
  /// noise with covariance Rd (the grid filter's reference measure).
  double log_likelihood = 0.0;
};

/// Likelihood of future observations as exp(-s^T Y s / 2 + z^T s).
struct InformationPair {
  double t = 0.0;
  RMat Y;
  RVec z;
};

/// Predicted moments: entry i (i = 0..L) is s_i given y_0..y_{i-1}.
/// Joseph-form updates; throws NumericalError when a covariance loses
/// positive semidefiniteness.
std::vector<GaussianMoments> kalman_forward(const DiscreteLinearModel& model,
                                            const std::vector<RVec>& y, double t0 = 0.0,
                                            double dt = 1.0);

/// Backward information filter: entry i (i = 0..L) carries the likelihood of
/// y_i..y_{L-1} given s_i, with Y_L = 0 and z_L = 0.
std::vector<InformationPair> information_backward(const DiscreteLinearModel& model,
                                                  const std::vector<RVec>& y, double t0 = 0.0,
                                                  double dt = 1.0);

/// P_s = (P^-1 + Y)^-1, m_s = P_s (P^-1 m + z). Throws std::invalid_argument
/// when P is not positive definite or shapes differ.
GaussianMoments mfp_combine(const GaussianMoments& forward, const InformationPair& backward);

std::vector<GaussianMoments> kalman_bucy_forward(const LinearGaussianModel& model,
                                                 const TrajectoryRecord& record);
std::vector<InformationPair> kalman_bucy_backward(const LinearGaussianModel& model,
                                                  const TrajectoryRecord& record);
/// Two-filter (Mayne-Fraser-Potter) smoother over the whole record.
std::vector<GaussianMoments> kalman_bucy_smooth(const LinearGaussianModel& model,
                                                const TrajectoryRecord& record);

/// Residual F P + P F^T + N - P H^T R^-1 H P.
RMat riccati_residual(const LinearGaussianModel& model, const RMat& P);

/// The classical block (x_1..x_n) of phase-space moments.
GaussianMoments classical_block(const LinearGaussianModel& model, const GaussianMoments& s);

}  // namespace qsmooth
