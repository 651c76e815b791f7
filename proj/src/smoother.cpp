#include "qsmooth/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "qsmooth/errors.hpp"
#include "qsmooth/kernels.hpp"

namespace qsmooth {

namespace {

constexpr double kImagTolerance = 1e-8;

SmoothingDensity combine_impl(const HybridDensityField& f, const EffectField& g,
                              double* rel_imag) {
  if (!f.grid || !g.grid || !(*f.grid == *g.grid)) {
    throw std::invalid_argument("combine: fields live on different grids");
  }
  if (f.dim() != g.dim()) throw std::invalid_argument("combine: Hilbert dimensions differ");
  if (std::abs(f.t - g.t) > 1e-9 * std::max(1.0, std::abs(f.t))) {
    std::ostringstream msg;
    msg << "combine: field times differ (" << f.t << " vs " << g.t << ")";
    throw std::invalid_argument(msg.str());
  }
  std::vector<double> traces;
  double max_imag = 0.0;
  kernels::pair_traces(g.blocks, f.blocks, traces, &max_imag);
  const double cellvol = f.grid->cell_volume();
  double total = 0.0;
  double largest = 0.0;
  for (double v : traces) {
    total += v;
    largest = std::max(largest, std::abs(v));
  }
  if (!std::isfinite(total) || !(total > 0.0)) {
    throw NumericalError("combine: forward and backward fields have no overlap (grid or "
                         "truncation too small?)");
  }
  const double rel = max_imag / largest;
  if (rel > kImagTolerance) {
    std::ostringstream msg;
    msg << "combine: imaginary part of tr[g f] is " << rel << " of the real part";
    throw NumericalError(msg.str());
  }
  if (rel_imag) *rel_imag = rel;

  SmoothingDensity s;
  s.t = f.t;
  s.h = Eigen::Map<const RVec>(traces.data(), static_cast<Eigen::Index>(traces.size())) /
        (total * cellvol);
  grid_moments(*f.grid, s.h, s.x_mean, s.x_cov);
  return s;
}

enum class Past { filtered, empty };

void forward_step(const HybridEngine& engine, HybridDensityField& f, const TrajectoryRecord& rec,
                  std::size_t i, Past past, KernelMode mode) {
  try {
    if (past == Past::filtered) {
      filter_step(engine, f, rec.dy[i], mode);
    } else {
      predict_step(engine, f, engine.dt(), mode);
    }
  } catch (const NumericalError& err) {
    std::ostringstream msg;
    msg << err.what() << " (forward step " << i << ")";
    throw NumericalError(msg.str());
  }
  f.t = rec.time(i);
}

SmoothResult two_pass(const HybridEngine& engine, const TrajectoryRecord& record,
                      const SmoothOptions& options, Past past) {
  const Scenario& sc = engine.scenario();
  check_record(sc, record);
  const std::size_t n = record.steps();
  const std::size_t stride = options.stride ? options.stride : sc.effective_stride();
  std::size_t chunk = options.checkpoint_interval;
  if (chunk == 0) {
    chunk = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(double(n)))));
  }

  SmoothResult out;
  out.steps = snapshot_schedule(n, stride);
  out.forward.reserve(n + 1);

  auto wanted = [&](std::size_t i) { return i % stride == 0 || i == n; };
  const std::size_t field_bytes = engine.grid().size() * static_cast<std::size_t>(engine.dim()) *
                                  static_cast<std::size_t>(engine.dim()) * sizeof(Complex);
  const bool direct = out.steps.size() * field_bytes <= options.direct_budget_bytes;

  // forward sweep: estimates at every step; either the fields at the output
  // steps or checkpoints every chunk steps
  std::vector<HybridDensityField> checkpoints;
  HybridDensityField f = init_field(engine);
  out.forward.push_back(estimate(f));
  checkpoints.push_back(f);
  for (std::size_t i = 0; i < n; ++i) {
    forward_step(engine, f, record, i, past, options.mode);
    out.forward.push_back(estimate(f));
    if (i + 1 == n) break;
    if (direct ? wanted(i + 1) : (i + 1) % chunk == 0) checkpoints.push_back(f);
  }
  const HybridDensityField f_final = std::move(f);
  if (direct) {
    chunk = stride;
  }

  // backward sweep, recomputing each forward segment from its checkpoint
  std::vector<SmoothingDensity> reversed;
  reversed.reserve(out.steps.size());
  double worst_imag = 0.0;
  auto emit = [&](const HybridDensityField& fi, const EffectField& gi) {
    double rel = 0.0;
    reversed.push_back(combine_impl(fi, gi, &rel));
    worst_imag = std::max(worst_imag, rel);
  };

  EffectField g = init_effect(engine);
  g.t = f_final.t;
  emit(f_final, g);
  std::vector<HybridDensityField> segment;
  for (std::size_t seg = checkpoints.size(); seg-- > 0;) {
    const std::size_t a = seg * chunk;
    const std::size_t b = std::min(a + chunk, n);
    segment.clear();
    segment.push_back(checkpoints[seg]);
    for (std::size_t i = a; !direct && i + 1 < b; ++i) {
      HybridDensityField next = segment.back();
      forward_step(engine, next, record, i, past, options.mode);
      segment.push_back(std::move(next));
    }
    for (std::size_t i = b; i-- > a;) {
      try {
        backward_step(engine, g, record.dy[i], record.dt, options.mode);
      } catch (const NumericalError& err) {
        std::ostringstream msg;
        msg << err.what() << " (backward step " << i << ")";
        throw NumericalError(msg.str());
      }
      g.t = record.t0 + static_cast<double>(i) * record.dt;
      if (direct && i != a) continue;
      const HybridDensityField& fi = segment[i - a];
      if (wanted(i)) emit(fi, g);
      if (i == 0) {
        out.log_likelihood = std::log(pairing(g, fi)) + g.log_weight + fi.log_weight;
      }
    }
    checkpoints[seg] = HybridDensityField{};
  }
  if (n == 0) out.log_likelihood = 0.0;

  std::reverse(reversed.begin(), reversed.end());
  out.smoothed = std::move(reversed);
  out.max_imag_residue = worst_imag;
  return out;
}

}  // namespace

void grid_moments(const ClassicalGrid& grid, const RVec& density, RVec& mean, RMat& cov) {
  const double cellvol = grid.cell_volume();
  const int n = grid.dim();
  mean = RVec::Zero(n);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    mean += density(static_cast<Eigen::Index>(k)) * cellvol * grid.point(k);
  }
  cov = RMat::Zero(n, n);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const RVec dx = grid.point(k) - mean;
    cov += density(static_cast<Eigen::Index>(k)) * cellvol * dx * dx.transpose();
  }
}

SmoothingDensity combine(const HybridDensityField& f, const EffectField& g) {
  return combine_impl(f, g, nullptr);
}

SmoothResult smooth_series(const HybridEngine& engine, const TrajectoryRecord& record,
                           const SmoothOptions& options) {
  return two_pass(engine, record, options, Past::filtered);
}

SmoothResult retrodict(const HybridEngine& engine, const TrajectoryRecord& record,
                       const SmoothOptions& options) {
  return two_pass(engine, record, options, Past::empty);
}

}  // namespace qsmooth
