#include "qsmooth/backward_filter.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qsmooth/errors.hpp"
#include "qsmooth/kernels.hpp"

namespace qsmooth {

EffectField init_effect(const HybridEngine& engine) {
  EffectField g;
  g.grid = engine.grid_ptr();
  g.t = engine.scenario().T;
  g.blocks.assign(engine.grid().size(), CMat::Identity(engine.dim(), engine.dim()));
  return g;
}

void backward_step(const HybridEngine& engine, EffectField& field, const RVec& dy, double dt,
                   KernelMode mode) {
  if (std::abs(dt - engine.dt()) > 1e-12 * engine.dt()) {
    throw std::invalid_argument("backward_step: dt does not match the scenario");
  }
  const double t_start = field.t - dt;
  const TransitionKernel& k = engine.kernel(t_start);
  const CMat kraus = measurement_kraus(engine.measurement(), dy, dt);
  std::vector<CMat> out;
  if (mode == KernelMode::serial) {
    kernels::serial::mix_adjoint(k, field.blocks, out);
    kernels::serial::propagate_measure_adjoint(kraus, engine.propagators(), out);
  } else {
    kernels::mix_adjoint(k, field.blocks, out);
    kernels::propagate_measure_adjoint(kraus, engine.propagators(), out);
  }
  field.blocks.swap(out);
  field.t = t_start;
  const double z = field.trace_sum();
  if (!std::isfinite(z)) throw NumericalError("backward_step: non-finite effect");
  if (!(z > 1e-300)) throw NumericalError("backward_step: effect trace underflow");
  field.normalize();
}

BackwardResult run_backward(const HybridEngine& engine, const TrajectoryRecord& record,
                            const FilterOptions& options) {
  const Scenario& sc = engine.scenario();
  check_record(sc, record);
  const std::size_t n = record.steps();
  const std::size_t stride = options.snapshot_stride ? options.snapshot_stride
                                                     : sc.effective_stride();
  BackwardResult out;
  out.snapshot_steps = snapshot_schedule(n, stride);
  out.snapshots.resize(out.snapshot_steps.size());

  EffectField g = init_effect(engine);
  g.t = record.t0 + static_cast<double>(n) * record.dt;
  std::size_t slot = out.snapshot_steps.size();
  auto maybe_snapshot = [&](std::size_t i) {
    if (slot > 0 && out.snapshot_steps[slot - 1] == i) out.snapshots[--slot] = g;
  };
  maybe_snapshot(n);
  for (std::size_t i = n; i-- > 0;) {
    try {
      backward_step(engine, g, record.dy[i], record.dt, options.mode);
    } catch (const NumericalError& err) {
      std::ostringstream msg;
      msg << err.what() << " (backward step " << i << ")";
      throw NumericalError(msg.str());
    }
    g.t = record.t0 + static_cast<double>(i) * record.dt;
    maybe_snapshot(i);
  }
  return out;
}

double pairing(const OperatorField& g, const OperatorField& f, double* max_imag) {
  if (g.size() != f.size()) throw std::invalid_argument("pairing: grid sizes differ");
  if (g.dim() != f.dim()) throw std::invalid_argument("pairing: Hilbert dimensions differ");
  std::vector<double> traces;
  kernels::pair_traces(g.blocks, f.blocks, traces, max_imag);
  double s = 0.0;
  for (double v : traces) s += v;
  return s * f.grid->cell_volume();
}

double log_pairing(const EffectField& g, const HybridDensityField& f) {
  return std::log(pairing(g, f)) + g.log_weight + f.log_weight;
}

}  // namespace qsmooth
