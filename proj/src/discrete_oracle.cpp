#include "qsmooth/discrete_oracle.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "qsmooth/errors.hpp"
#include "qsmooth/forward_filter.hpp"
#include "qsmooth/rng.hpp"
#include "qsmooth/smoother.hpp"

namespace qsmooth {

namespace {

using Paths = std::vector<std::vector<int>>;

// All K^len index sequences, first entry slowest.
Paths all_paths(int k, std::size_t len) {
  Paths out{{}};
  for (std::size_t i = 0; i < len; ++i) {
    Paths next;
    for (const auto& p : out) {
      for (int j = 0; j < k; ++j) {
        auto q = p;
        q.push_back(j);
        next.push_back(std::move(q));
      }
    }
    out = std::move(next);
  }
  return out;
}

CMat apply_super(const CMat& s, const CMat& rho) {
  const int d = static_cast<int>(rho.rows());
  return unvectorize(s * vectorize(rho), d);
}

CMat apply_super_adjoint(const CMat& s, const CMat& e) {
  const int d = static_cast<int>(e.rows());
  return unvectorize(s.adjoint() * vectorize(e), d);
}

// rho -> S_{i,k}(M rho M^dag)
CMat forward_path_step(const DiscreteScenario& ds, std::size_t i, int k, const CMat& kraus,
                       const CMat& rho) {
  return apply_super(ds.propagator(i, k), kraus * rho * kraus.adjoint());
}

std::vector<CMat> kraus_sequence(const DiscreteScenario& ds, const std::vector<RVec>& record) {
  std::vector<CMat> out;
  out.reserve(record.size());
  for (std::size_t i = 0; i < record.size(); ++i) out.push_back(ds.kraus(i, record[i]));
  return out;
}

CMat pauli_x() {
  CMat m = CMat::Zero(2, 2);
  m(0, 1) = m(1, 0) = 1.0;
  return m;
}

CMat pauli_z() {
  CMat m = CMat::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -1.0;
  return m;
}

CMat matched_rho0() {
  CMat rho(2, 2);
  rho << 0.7, Complex(0.3, 0.1), Complex(0.3, -0.1), 0.3;
  return rho;
}

Scenario matched_scenario_span(const MatchedInstance& inst, double dt, double T) {
  const CMat sx = pauli_x();
  const CMat sz = pauli_z();
  const double gap = inst.gap;
  const double tunnel = inst.tunnel;
  Scenario sc;
  sc.id = "matched-two-level";
  sc.quantum = std::make_shared<QuantumModel>(
      2, [sx, sz, gap, tunnel](const RVec& x) -> CMat {
        return 0.5 * gap * sz + tunnel * x(0) * sx;
      });
  sc.classical = std::make_shared<ClassicalModel>(
      ClassicalModel::constant(0.2, inst.x_spread * inst.x_spread));
  sc.measurement = std::make_shared<MeasurementModel>(std::vector<CMat>{sz},
                                                      RMat::Constant(1, 1, inst.R));
  sc.grid = std::make_shared<ClassicalGrid>(std::vector<GridAxis>{{-1.0, 1.0, 2}});
  sc.rho0 = matched_rho0();
  sc.t0 = 0.0;
  sc.T = T;
  sc.dt = dt;
  sc.snapshot_stride = 1;
  sc.validate();
  return sc;
}

std::size_t substeps(const MatchedInstance& inst, double dt) {
  const double ratio = inst.oracle_step / dt;
  const auto n = static_cast<std::size_t>(std::llround(ratio));
  if (n == 0 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * ratio) {
    std::ostringstream msg;
    msg << "dt " << dt << " does not divide the oracle step " << inst.oracle_step;
    throw std::invalid_argument(msg.str());
  }
  return n;
}

}  // namespace

CMat sandwich_superoperator(const CMat& left, const CMat& right) {
  return kroneckerProduct(right.transpose(), left);
}

CMat vectorize(const CMat& m) {
  return Eigen::Map<const CMat>(m.data(), m.size(), 1);
}

CMat unvectorize(const CMat& v, int dim) {
  if (v.size() != static_cast<Eigen::Index>(dim) * dim) {
    throw std::invalid_argument("unvectorize: size mismatch");
  }
  return Eigen::Map<const CMat>(v.data(), dim, dim);
}

const CMat& DiscreteScenario::propagator(std::size_t step, int k) const {
  const auto& per_step = propagators.size() == 1 ? propagators.front() : propagators.at(step);
  return per_step.at(static_cast<std::size_t>(k));
}

void DiscreteScenario::validate(std::size_t steps) const {
  if (steps > kMaxSteps || grid_points > kMaxGrid || dim > kMaxDim) {
    std::ostringstream msg;
    msg << "discrete oracle instance too large (L=" << steps << ", K=" << grid_points
        << ", d=" << dim << "; limits " << kMaxSteps << ", " << kMaxGrid << ", " << kMaxDim
        << ")";
    throw TooLarge(msg.str());
  }
  if (grid_points < 1 || dim < 1) throw std::invalid_argument("DiscreteScenario: empty");
  if (transition.rows() != grid_points || transition.cols() != grid_points) {
    throw std::invalid_argument("DiscreteScenario: transition matrix shape");
  }
  for (int k = 0; k < grid_points; ++k) {
    if (std::abs(transition.row(k).sum() - 1.0) > 1e-12 || transition.row(k).minCoeff() < 0.0) {
      throw std::invalid_argument("DiscreteScenario: transition rows must be stochastic");
    }
  }
  if (prior.size() != grid_points || std::abs(prior.sum() - 1.0) > 1e-12 ||
      prior.minCoeff() < 0.0) {
    throw std::invalid_argument("DiscreteScenario: prior must be a probability vector");
  }
  if (rho0.rows() != dim || rho0.cols() != dim) {
    throw std::invalid_argument("DiscreteScenario: rho0 shape");
  }
  if (propagators.empty() || (propagators.size() != 1 && propagators.size() < steps)) {
    throw std::invalid_argument("DiscreteScenario: missing step propagators");
  }
  for (const auto& per_step : propagators) {
    if (per_step.size() != static_cast<std::size_t>(grid_points)) {
      throw std::invalid_argument("DiscreteScenario: one propagator per grid point required");
    }
    for (const auto& s : per_step) {
      if (s.rows() != dim * dim || s.cols() != dim * dim) {
        throw std::invalid_argument("DiscreteScenario: propagator shape");
      }
    }
  }
  if (!kraus) throw std::invalid_argument("DiscreteScenario: no Kraus builder");
}

std::vector<std::vector<CMat>> enumerate_forward(const DiscreteScenario& ds,
                                                 const std::vector<RVec>& record) {
  ds.validate(record.size());
  const auto kraus = kraus_sequence(ds, record);
  const int K = ds.grid_points;
  std::vector<std::vector<CMat>> out;
  for (std::size_t tau = 0; tau <= record.size(); ++tau) {
    std::vector<CMat> f(K, CMat::Zero(ds.dim, ds.dim));
    for (const auto& path : all_paths(K, tau + 1)) {
      double weight = ds.prior(path[0]);
      CMat rho = ds.rho0;
      for (std::size_t i = 0; i < tau; ++i) {
        rho = forward_path_step(ds, i, path[i], kraus[i], rho);
        weight *= ds.transition(path[i], path[i + 1]);
      }
      f[path[tau]] += weight * rho;
    }
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<std::vector<CMat>> recursive_forward(const DiscreteScenario& ds,
                                                 const std::vector<RVec>& record) {
  ds.validate(record.size());
  const int K = ds.grid_points;
  const int d2 = ds.dim * ds.dim;
  auto unpack = [&](const CMat& v) {
    std::vector<CMat> f;
    for (int k = 0; k < K; ++k) f.push_back(unvectorize(v.middleRows(k * d2, d2), ds.dim));
    return f;
  };
  CMat v(K * d2, 1);
  for (int k = 0; k < K; ++k) v.middleRows(k * d2, d2) = ds.prior(k) * vectorize(ds.rho0);
  std::vector<std::vector<CMat>> out{unpack(v)};
  const CMat eye = CMat::Identity(d2, d2);
  for (std::size_t i = 0; i < record.size(); ++i) {
    const CMat m = ds.kraus(i, record[i]);
    const CMat measure = sandwich_superoperator(m, m.adjoint());
    CMat local = CMat::Zero(K * d2, K * d2);
    for (int k = 0; k < K; ++k) local.block(k * d2, k * d2, d2, d2) = ds.propagator(i, k) * measure;
    const CMat mixing = kroneckerProduct(ds.transition.transpose().cast<Complex>(), eye);
    v = mixing * local * v;
    out.push_back(unpack(v));
  }
  return out;
}

std::vector<std::vector<CMat>> enumerate_effect(const DiscreteScenario& ds,
                                                const std::vector<RVec>& record) {
  ds.validate(record.size());
  const auto kraus = kraus_sequence(ds, record);
  const int K = ds.grid_points;
  const std::size_t L = record.size();
  std::vector<std::vector<CMat>> out(L + 1);
  for (std::size_t tau = 0; tau <= L; ++tau) {
    std::vector<CMat> e(K, CMat::Zero(ds.dim, ds.dim));
    for (const auto& path : all_paths(K, L - tau + 1)) {
      // path[j] is the grid index at step tau + j
      double weight = 1.0;
      for (std::size_t j = 0; j + 1 < path.size(); ++j) {
        weight *= ds.transition(path[j], path[j + 1]);
      }
      CMat eff = CMat::Identity(ds.dim, ds.dim);
      for (std::size_t i = L; i-- > tau;) {
        eff = apply_super_adjoint(ds.propagator(i, path[i - tau]), eff);
        eff = kraus[i].adjoint() * eff * kraus[i];
      }
      e[path[0]] += weight * eff;
    }
    out[tau] = std::move(e);
  }
  return out;
}

double oracle_pairing(const std::vector<CMat>& effect, const std::vector<CMat>& forward) {
  if (effect.size() != forward.size()) throw std::invalid_argument("oracle_pairing: sizes");
  double s = 0.0;
  for (std::size_t k = 0; k < effect.size(); ++k) s += (effect[k] * forward[k]).trace().real();
  return s;
}

std::vector<RVec> oracle_smooth(const DiscreteScenario& ds, const std::vector<RVec>& record) {
  const auto f = enumerate_forward(ds, record);
  const auto e = enumerate_effect(ds, record);
  std::vector<RVec> out;
  for (std::size_t tau = 0; tau < f.size(); ++tau) {
    RVec h(ds.grid_points);
    for (int k = 0; k < ds.grid_points; ++k) h(k) = (e[tau][k] * f[tau][k]).trace().real();
    const double z = h.sum();
    if (!(z > 0.0)) throw NumericalError("oracle_smooth: zero record likelihood");
    out.push_back(h / z);
  }
  return out;
}

std::vector<RVec> brute_force_smooth(const DiscreteScenario& ds, const std::vector<RVec>& record) {
  ds.validate(record.size());
  const auto kraus = kraus_sequence(ds, record);
  const int K = ds.grid_points;
  const std::size_t L = record.size();
  std::vector<RVec> out(L + 1, RVec::Zero(K));
  double total = 0.0;
  for (const auto& path : all_paths(K, L + 1)) {
    double weight = ds.prior(path[0]);
    CMat rho = ds.rho0;
    for (std::size_t i = 0; i < L; ++i) {
      rho = forward_path_step(ds, i, path[i], kraus[i], rho);
      weight *= ds.transition(path[i], path[i + 1]);
    }
    const double joint = weight * rho.trace().real();
    total += joint;
    for (std::size_t tau = 0; tau <= L; ++tau) out[tau](path[tau]) += joint;
  }
  if (!(total > 0.0)) throw NumericalError("brute_force_smooth: zero record likelihood");
  for (auto& h : out) h /= total;
  return out;
}

DiscreteScenario discrete_from_engine(const HybridEngine& engine) {
  const Scenario& sc = engine.scenario();
  if (!sc.classical->time_invariant) {
    throw UnsupportedScenario("discrete_from_engine: time-varying classical dynamics");
  }
  DiscreteScenario ds;
  ds.grid_points = static_cast<int>(engine.grid().size());
  ds.dim = engine.dim();
  ds.transition = engine.kernel(sc.t0).dense();
  const HybridDensityField f0 = init_field(engine);
  ds.prior.resize(ds.grid_points);
  for (int k = 0; k < ds.grid_points; ++k) ds.prior(k) = f0.blocks[k].trace().real();
  ds.prior /= ds.prior.sum();
  ds.rho0 = sc.rho0;
  std::vector<CMat> props;
  for (const auto& p : engine.propagators()) props.push_back(p.superoperator());
  ds.propagators = {props};
  auto meas = sc.measurement;
  const double dt = sc.dt;
  ds.kraus = [meas, dt](std::size_t, const RVec& dy) { return measurement_kraus(*meas, dy, dt); };
  return ds;
}

Scenario matched_scenario(const MatchedInstance& inst, double dt) {
  substeps(inst, dt);
  return matched_scenario_span(inst, dt,
                               inst.oracle_step * static_cast<double>(inst.rates.size()));
}

TrajectoryRecord matched_record(const MatchedInstance& inst, double dt) {
  const std::size_t n = substeps(inst, dt);
  TrajectoryRecord rec;
  rec.t0 = 0.0;
  rec.T = inst.oracle_step * static_cast<double>(inst.rates.size());
  rec.dt = dt;
  rec.x_initial = RVec::Zero(1);
  rec.scenario_id = "matched-two-level";
  rec.scenario_hash = "custom";
  for (double rate : inst.rates) {
    for (std::size_t j = 0; j < n; ++j) {
      rec.dy.push_back(RVec::Constant(1, rate * dt));
      rec.x_true.push_back(RVec::Zero(1));
    }
  }
  return rec;
}

DiscreteScenario matched_oracle(const MatchedInstance& inst) {
  const Scenario sc = matched_scenario(inst, inst.oracle_step);
  const ClassicalGrid& grid = *sc.grid;
  const CMat c = sc.measurement->channels().front();
  const CMat c2 = c * c;
  const CMat eye = CMat::Identity(2, 2);

  DiscreteScenario ds;
  ds.grid_points = static_cast<int>(grid.size());
  ds.dim = 2;
  ds.transition = RMat::Identity(ds.grid_points, ds.grid_points);
  const auto prior = prior_density(*sc.classical, grid);
  ds.prior = Eigen::Map<const RVec>(prior.data(), static_cast<Eigen::Index>(prior.size()));
  ds.prior /= ds.prior.sum();
  ds.rho0 = sc.rho0;
  for (double rate : inst.rates) {
    std::vector<CMat> per_point;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const CMat h = sc.quantum->hamiltonian(grid.point(k));
      const Complex i(0.0, 1.0);
      CMat gen = -i * (sandwich_superoperator(h, eye) - sandwich_superoperator(eye, h));
      gen += (rate / (2.0 * inst.R)) * (sandwich_superoperator(c, eye) + sandwich_superoperator(eye, c));
      gen -= (1.0 / (4.0 * inst.R)) *
             (sandwich_superoperator(c2, eye) + sandwich_superoperator(eye, c2));
      per_point.push_back((inst.oracle_step * gen).exp());
    }
    ds.propagators.push_back(std::move(per_point));
  }
  ds.kraus = [](std::size_t, const RVec&) -> CMat { return CMat::Identity(2, 2); };
  return ds;
}

std::vector<RVec> matched_oracle_record(const MatchedInstance& inst) {
  std::vector<RVec> out;
  for (double rate : inst.rates) out.push_back(RVec::Constant(1, rate * inst.oracle_step));
  return out;
}

ConvergenceReport convergence_ladder(const MatchedInstance& inst, const std::vector<double>& dts) {
  const DiscreteScenario ds = matched_oracle(inst);
  const auto oracle = oracle_smooth(ds, matched_oracle_record(inst));
  ConvergenceReport report;
  for (double dt : dts) {
    const std::size_t n = substeps(inst, dt);
    const Scenario sc = matched_scenario(inst, dt);
    const HybridEngine engine(sc);
    const TrajectoryRecord rec = matched_record(inst, dt);
    SmoothOptions opts;
    opts.stride = n;
    const SmoothResult res = smooth_series(engine, rec, opts);
    const double cellvol = sc.grid->cell_volume();
    double worst = 0.0;
    for (std::size_t j = 0; j < oracle.size(); ++j) {
      const RVec h = res.smoothed.at(j).h * cellvol;
      worst = std::max(worst, (h - oracle[j]).cwiseAbs().sum());
    }
    report.rungs.push_back({dt, worst});
  }
  for (std::size_t i = 1; i < report.rungs.size(); ++i) {
    report.orders.push_back(std::log(report.rungs[i - 1].error / report.rungs[i].error) /
                            std::log(report.rungs[i - 1].dt / report.rungs[i].dt));
  }
  if (report.rungs.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (const auto& r : report.rungs) {
      mx += std::log(r.dt);
      my += std::log(r.error);
    }
    mx /= static_cast<double>(report.rungs.size());
    my /= static_cast<double>(report.rungs.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& r : report.rungs) {
      sxy += (std::log(r.dt) - mx) * (std::log(r.error) - my);
      sxx += (std::log(r.dt) - mx) * (std::log(r.dt) - mx);
    }
    report.fitted_order = sxy / sxx;
  }
  return report;
}

double exact_factor_check(const MatchedInstance& inst, double dt, std::size_t steps,
                          std::uint64_t seed) {
  const Scenario sc = matched_scenario_span(inst, dt, dt * static_cast<double>(steps));
  const HybridEngine engine(sc);
  const CounterRng rng(seed, "oracle-record");
  TrajectoryRecord rec;
  rec.t0 = 0.0;
  rec.T = sc.T;
  rec.dt = dt;
  rec.x_initial = RVec::Zero(1);
  rec.scenario_hash = "custom";
  const double noise_sd = std::sqrt(inst.R * dt);
  for (std::size_t i = 0; i < steps; ++i) {
    rec.dy.push_back(RVec::Constant(1, 0.5 * dt + noise_sd * rng.normal(i)));
    rec.x_true.push_back(RVec::Zero(1));
  }
  const DiscreteScenario ds = discrete_from_engine(engine);
  const auto oracle = oracle_smooth(ds, rec.dy);
  SmoothOptions opts;
  opts.stride = 1;
  const SmoothResult res = smooth_series(engine, rec, opts);
  const double cellvol = sc.grid->cell_volume();
  double worst = 0.0;
  for (std::size_t j = 0; j < oracle.size(); ++j) {
    worst = std::max(worst, (res.smoothed.at(j).h * cellvol - oracle[j]).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace qsmooth
