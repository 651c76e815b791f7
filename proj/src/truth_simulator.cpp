#include "qsmooth/truth_simulator.hpp"

#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qsmooth/errors.hpp"
#include "qsmooth/rng.hpp"

namespace qsmooth {

namespace {

RVec sample_prior(const ClassicalModel& model, const CounterRng& rng) {
  RVec z(model.n);
  for (int i = 0; i < model.n; ++i) z(i) = rng.normal(static_cast<std::uint64_t>(i));
  Eigen::SelfAdjointEigenSolver<RMat> eig(model.initial_cov);
  const RVec sd = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return model.initial_mean + eig.eigenvectors() * sd.asDiagonal() * z;
}

RMat psd_sqrt(const RMat& m) {
  Eigen::SelfAdjointEigenSolver<RMat> eig(m);
  return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace

void TrajectoryRecord::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("TrajectoryRecord: dt must be positive");
  if (x_true.size() != dy.size()) {
    throw std::invalid_argument("TrajectoryRecord: x_true and dy lengths differ");
  }
  const double expected = (T - t0) / dt;
  if (std::abs(expected - static_cast<double>(dy.size())) > 1e-9 * std::max(1.0, expected)) {
    throw std::invalid_argument("TrajectoryRecord: length does not match (T - t0) / dt");
  }
}

TrajectoryRecord simulate_truth(const Scenario& scenario, std::uint64_t seed, TruthTrace* trace) {
  scenario.validate();
  const std::size_t n_steps = scenario.steps();
  const ClassicalModel& cm = *scenario.classical;
  const MeasurementModel& meas = *scenario.measurement;
  const QuantumModel& qm = *scenario.quantum;
  const double dt = scenario.dt;
  const int m = meas.channel_count();

  const CounterRng prior_rng(seed, "prior");
  const CounterRng classical_rng(seed, "classical-noise");
  const CounterRng measurement_rng(seed, "measurement-noise");

  TrajectoryRecord rec;
  rec.t0 = scenario.t0;
  rec.T = scenario.T;
  rec.dt = dt;
  rec.seed = seed;
  rec.scenario_id = scenario.id;
  rec.scenario_hash = scenario.hash;
  rec.x_true.reserve(n_steps);
  rec.dy.reserve(n_steps);

  const RMat noise_chol = psd_sqrt(meas.noise_cov() * dt);
  RVec x = sample_prior(cm, prior_rng);
  rec.x_initial = x;
  CMat rho = scenario.rho0;

  for (std::size_t i = 0; i < n_steps; ++i) {
    const double t = scenario.t0 + static_cast<double>(i) * dt;

    // (i) measurement increment from the current conditional state
    RVec z(m);
    for (int c = 0; c < m; ++c) z(c) = measurement_rng.normal(i * static_cast<std::uint64_t>(m) + c);
    const RVec noise = noise_chol * z;
    const RVec signal = meas.expected_signal(rho);
    RVec dy = signal * dt + noise;

    // (ii) Bayes update with the emitted increment, at the true x
    const CMat kraus = measurement_kraus(meas, dy, dt);
    rho = kraus * rho * kraus.adjoint();
    const double tr = rho.trace().real();
    if (!(tr > 1e-12)) {
      std::ostringstream msg;
      msg << "simulate_truth: conditional state trace " << tr << " at step " << i
          << " (dt too large?)";
      throw NumericalError(msg.str());
    }
    rho /= tr;

    // (iii) quantum dynamics at the true x, RK4 on the generator directly
    const LindbladGenerator gen = LindbladGenerator::at(qm, x);
    rho = lindblad_rk4_step(gen, rho, dt);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace().real();

    // (iv) classical step
    RVec dw(cm.w);
    const RMat q_sqrt = psd_sqrt(cm.wiener_cov(t) * dt);
    for (int c = 0; c < cm.w; ++c) {
      dw(c) = classical_rng.normal(i * static_cast<std::uint64_t>(cm.w) + c);
    }
    x = euler_maruyama_step(cm, x, t, dt, q_sqrt * dw);

    rec.dy.push_back(dy);
    rec.x_true.push_back(x);

    if (trace) {
      trace->expected_signal.push_back(signal);
      trace->injected_noise.push_back(noise);
      trace->trace_before_norm.push_back(tr);
      Eigen::SelfAdjointEigenSolver<CMat> eig(rho, Eigen::EigenvaluesOnly);
      trace->min_eigenvalue.push_back(eig.eigenvalues().minCoeff());
      if (trace->keep_states) trace->rho_true.push_back(rho);
    }
  }
  return rec;
}

bool replay_check(const TrajectoryRecord& record, const Scenario& scenario) {
  if (record.scenario_hash != scenario.hash) {
    throw std::invalid_argument("replay_check: record was produced by scenario " +
                                record.scenario_hash + ", not " + scenario.hash);
  }
  const TrajectoryRecord fresh = simulate_truth(scenario, record.seed);
  if (fresh.dy.size() != record.dy.size()) return false;
  auto same = [](const RVec& a, const RVec& b) {
    if (a.size() != b.size()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (std::bit_cast<std::uint64_t>(a(i)) != std::bit_cast<std::uint64_t>(b(i))) return false;
    }
    return true;
  };
  if (!same(fresh.x_initial, record.x_initial)) return false;
  for (std::size_t i = 0; i < fresh.dy.size(); ++i) {
    if (!same(fresh.dy[i], record.dy[i]) || !same(fresh.x_true[i], record.x_true[i])) return false;
  }
  return true;
}

}  // namespace qsmooth
