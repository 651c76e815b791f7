#include "qsmooth/forward_filter.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qsmooth/errors.hpp"
#include "qsmooth/kernels.hpp"

namespace qsmooth {

namespace {

void check_dt(const HybridEngine& engine, double dt) {
  if (std::abs(dt - engine.dt()) > 1e-12 * engine.dt()) {
    std::ostringstream msg;
    msg << "step dt " << dt << " does not match the scenario dt " << engine.dt();
    throw std::invalid_argument(msg.str());
  }
}

void renormalize(HybridDensityField& field, const char* what) {
  const double z = field.total_trace();
  if (!std::isfinite(z)) throw NumericalError(std::string(what) + ": non-finite field");
  if (!(z > 1e-300)) throw NumericalError(std::string(what) + ": total trace underflow");
  field.normalize();
}

void mix(const HybridEngine& engine, HybridDensityField& field, KernelMode mode) {
  const TransitionKernel& k = engine.kernel(field.t);
  std::vector<CMat> out;
  if (mode == KernelMode::serial) {
    kernels::serial::mix_forward(k, field.blocks, out);
  } else {
    kernels::mix_forward(k, field.blocks, out);
  }
  field.blocks.swap(out);
}

}  // namespace

void check_record(const Scenario& scenario, const TrajectoryRecord& record) {
  record.validate();
  if (!scenario.hash.empty() && scenario.hash != "custom" && !record.scenario_hash.empty() &&
      record.scenario_hash != "custom" && record.scenario_hash != scenario.hash) {
    throw std::invalid_argument("record belongs to scenario " + record.scenario_hash +
                                ", not " + scenario.hash);
  }
  if (std::abs(record.dt - scenario.dt) > 1e-12 * scenario.dt) {
    std::ostringstream msg;
    msg << "record dt " << record.dt << " does not match scenario dt " << scenario.dt;
    throw std::invalid_argument(msg.str());
  }
  if (std::abs(record.t0 - scenario.t0) > 1e-9 * std::max(1.0, std::abs(scenario.t0))) {
    throw std::invalid_argument("record t0 does not match the scenario");
  }
  const int m = scenario.measurement->channel_count();
  for (const auto& dy : record.dy) {
    if (dy.size() != m) throw std::invalid_argument("record increment has wrong channel count");
  }
}

std::vector<std::size_t> snapshot_schedule(std::size_t steps, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("snapshot stride must be positive");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < steps; i += stride) out.push_back(i);
  out.push_back(steps);
  return out;
}

HybridDensityField init_field(const HybridEngine& engine) {
  const Scenario& sc = engine.scenario();
  const std::vector<double> prior = prior_density(*sc.classical, engine.grid());
  HybridDensityField f;
  f.grid = engine.grid_ptr();
  f.t = sc.t0;
  f.blocks.reserve(prior.size());
  for (double p : prior) f.blocks.push_back(sc.rho0 * p);
  f.normalize();
  f.log_weight = 0.0;
  return f;
}

void predict_step(const HybridEngine& engine, HybridDensityField& field, double dt,
                  KernelMode mode) {
  check_dt(engine, dt);
  if (mode == KernelMode::serial) {
    kernels::serial::propagate(engine.propagators(), field.blocks);
  } else {
    kernels::propagate(engine.propagators(), field.blocks);
  }
  mix(engine, field, mode);
  field.t += dt;
  const double z = field.trace_sum();
  if (!std::isfinite(z)) throw NumericalError("predict_step: non-finite block");
}

void update_step(const HybridEngine& engine, HybridDensityField& field, const RVec& dy, double dt,
                 KernelMode mode) {
  check_dt(engine, dt);
  const CMat kraus = measurement_kraus(engine.measurement(), dy, dt);
  if (mode == KernelMode::serial) {
    kernels::serial::conjugate(kraus, field.blocks);
  } else {
    kernels::conjugate(kraus, field.blocks);
  }
  renormalize(field, "update_step");
}

void filter_step(const HybridEngine& engine, HybridDensityField& field, const RVec& dy,
                 KernelMode mode) {
  const CMat kraus = measurement_kraus(engine.measurement(), dy, engine.dt());
  if (mode == KernelMode::serial) {
    kernels::serial::measure_propagate(kraus, engine.propagators(), field.blocks);
  } else {
    kernels::measure_propagate(kraus, engine.propagators(), field.blocks);
  }
  mix(engine, field, mode);
  field.t += engine.dt();
  renormalize(field, "filter_step");
}

FilterEstimate estimate(const HybridDensityField& field) {
  const ClassicalGrid& grid = *field.grid;
  const double cellvol = grid.cell_volume();
  const int n = grid.dim();
  FilterEstimate e;
  e.t = field.t;
  e.log_likelihood = field.log_weight;
  e.p_x.resize(static_cast<Eigen::Index>(field.size()));
  CMat rho = CMat::Zero(field.dim(), field.dim());
  double total = 0.0;
  for (std::size_t k = 0; k < field.size(); ++k) {
    const double tr = field.blocks[k].trace().real();
    e.p_x(static_cast<Eigen::Index>(k)) = tr;
    total += tr;
    rho += field.blocks[k];
  }
  e.p_x /= total * cellvol;
  e.rho_cond = rho / total;
  e.x_mean = RVec::Zero(n);
  for (std::size_t k = 0; k < field.size(); ++k) {
    e.x_mean += e.p_x(static_cast<Eigen::Index>(k)) * cellvol * grid.point(k);
  }
  e.x_cov = RMat::Zero(n, n);
  for (std::size_t k = 0; k < field.size(); ++k) {
    const RVec dx = grid.point(k) - e.x_mean;
    e.x_cov += e.p_x(static_cast<Eigen::Index>(k)) * cellvol * dx * dx.transpose();
  }
  return e;
}

FilterResult run_filter(const HybridEngine& engine, const TrajectoryRecord& record,
                        const FilterOptions& options) {
  const Scenario& sc = engine.scenario();
  check_record(sc, record);
  const std::size_t n = record.steps();
  const std::size_t stride = options.snapshot_stride ? options.snapshot_stride
                                                     : sc.effective_stride();
  FilterResult out;
  if (options.keep_snapshots) out.snapshot_steps = snapshot_schedule(n, stride);
  out.estimates.reserve(n + 1);

  HybridDensityField field = init_field(engine);
  std::size_t next_snap = 0;
  auto maybe_snapshot = [&](std::size_t i) {
    if (next_snap < out.snapshot_steps.size() && out.snapshot_steps[next_snap] == i) {
      out.snapshots.push_back(field);
      ++next_snap;
    }
  };
  out.estimates.push_back(estimate(field));
  maybe_snapshot(0);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      filter_step(engine, field, record.dy[i], options.mode);
    } catch (const NumericalError& err) {
      std::ostringstream msg;
      msg << err.what() << " (filter step " << i << ", t = " << record.time(i) << ")";
      throw NumericalError(msg.str());
    }
    // keep the field's clock on the record grid instead of accumulating dt
    field.t = record.time(i);
    out.estimates.push_back(estimate(field));
    maybe_snapshot(i + 1);
  }
  out.final_field = std::move(field);
  return out;
}

std::vector<FilterEstimate> predict_ahead(const HybridEngine& engine, HybridDensityField field,
                                          double horizon, KernelMode mode) {
  if (horizon < 0.0) throw std::invalid_argument("predict_ahead: horizon must be non-negative");
  const double steps_f = horizon / engine.dt();
  const auto steps = static_cast<std::size_t>(std::llround(steps_f));
  if (std::abs(steps_f - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_f)) {
    throw std::invalid_argument("predict_ahead: horizon is not a multiple of dt");
  }
  std::vector<FilterEstimate> out;
  out.reserve(steps + 1);
  out.push_back(estimate(field));
  const double start = field.t;
  for (std::size_t i = 0; i < steps; ++i) {
    predict_step(engine, field, engine.dt(), mode);
    field.t = start + static_cast<double>(i + 1) * engine.dt();
    out.push_back(estimate(field));
  }
  return out;
}

}  // namespace qsmooth
