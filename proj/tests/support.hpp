#pragma once

#include <cmath>
#include <complex>
#include <memory>
#include <random>
#include <vector>

#include "qsmooth/hybrid_engine.hpp"
#include "qsmooth/scenario.hpp"
#include "qsmooth/truth_simulator.hpp"

namespace testing {

using namespace qsmooth;

inline CMat random_matrix(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = Complex(n(rng), n(rng));
  return m;
}

inline CMat random_hermitian(int d, std::mt19937_64& rng) {
  const CMat m = random_matrix(d, rng);
  return 0.5 * (m + m.adjoint());
}

inline CMat random_psd(int d, std::mt19937_64& rng) {
  const CMat m = random_matrix(d, rng);
  return m * m.adjoint();
}

inline CMat random_density(int d, std::mt19937_64& rng) {
  const CMat m = random_psd(d, rng);
  return m / m.trace().real();
}

inline double max_abs(const CMat& m) { return m.cwiseAbs().maxCoeff(); }

// Small generic hybrid scenario: d-level system with x-dependent
// Hamiltonian, optional damping, a non-Hermitian readout channel and an OU
// signal on a K-point grid.
struct SmallSpec {
  int dim = 3;
  std::size_t points = 4;
  double half_width = 2.0;
  double dt = 1e-2;
  double T = 0.1;
  double R = 0.7;
  bool dissipative = true;
  bool hermitian_readout = false;
  double lambda = 0.5;
  double sigma = 0.6;
  unsigned seed = 7;
};

inline Scenario small_scenario(const SmallSpec& s = {}) {
  std::mt19937_64 rng(s.seed);
  const CMat h0 = random_hermitian(s.dim, rng);
  const CMat h1 = random_hermitian(s.dim, rng);
  std::vector<CMat> jumps;
  if (s.dissipative) jumps.push_back(0.3 * random_matrix(s.dim, rng));
  const CMat c = s.hermitian_readout ? random_hermitian(s.dim, rng) : random_matrix(s.dim, rng);

  Scenario sc;
  sc.id = "small";
  sc.quantum = std::make_shared<QuantumModel>(
      s.dim, [h0, h1](const RVec& x) -> CMat { return h0 + x(0) * h1; }, jumps);
  sc.classical = std::make_shared<ClassicalModel>(
      ClassicalModel::ornstein_uhlenbeck(s.lambda, s.sigma, 0.1, 0.25));
  sc.measurement =
      std::make_shared<MeasurementModel>(std::vector<CMat>{0.5 * c}, RMat::Constant(1, 1, s.R));
  sc.grid = std::make_shared<ClassicalGrid>(
      std::vector<GridAxis>{{-s.half_width, s.half_width, s.points}});
  sc.rho0 = random_density(s.dim, rng);
  sc.t0 = 0.0;
  sc.T = s.T;
  sc.dt = s.dt;
  sc.snapshot_stride = 1;
  sc.validate();
  return sc;
}

// Record with the scenario's time grid and arbitrary increments (not a
// simulated trajectory).
inline TrajectoryRecord random_record(const Scenario& sc, unsigned seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  TrajectoryRecord rec;
  rec.t0 = sc.t0;
  rec.T = sc.T;
  rec.dt = sc.dt;
  rec.x_initial = RVec::Zero(sc.classical->n);
  rec.scenario_id = sc.id;
  rec.scenario_hash = sc.hash;
  const int m = sc.measurement->channel_count();
  for (std::size_t i = 0; i < sc.steps(); ++i) {
    RVec dy(m);
    for (int k = 0; k < m; ++k) dy(k) = scale * std::sqrt(sc.dt) * n(rng);
    rec.dy.push_back(dy);
    rec.x_true.push_back(RVec::Zero(sc.classical->n));
  }
  return rec;
}

// The oscillator + OU preset at a test-friendly size.
inline OscillatorScenarioParams lg_small(int fock = 16, std::size_t points = 81, double T = 2.0,
                                         double dt = 2e-3) {
  OscillatorScenarioParams p = lg_preset_params();
  p.fock_dim = fock;
  p.grid_points = points;
  p.T = T;
  p.dt = dt;
  return p;
}

}  // namespace testing
