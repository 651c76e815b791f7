// Serial reference kernels vs the OpenMP versions on the linear-Gaussian
// preset's grid. Args: fock dimension, grid points.

#include <benchmark/benchmark.h>

#include <map>
#include <memory>

#include "qsmooth/backward_filter.hpp"
#include "qsmooth/forward_filter.hpp"
#include "qsmooth/kernels.hpp"
#include "qsmooth/scenario.hpp"

using namespace qsmooth;

namespace {

struct Fixture {
  std::unique_ptr<HybridEngine> engine;
  HybridDensityField field;
  EffectField effect;
  CMat kraus;
};

Fixture& fixture(int dim, int points) {
  static std::map<std::pair<int, int>, std::unique_ptr<Fixture>> cache;
  auto& slot = cache[{dim, points}];
  if (!slot) {
    OscillatorScenarioParams p = lg_preset_params();
    p.fock_dim = dim;
    p.grid_points = static_cast<std::size_t>(points);
    p.T = 1.0;
    slot = std::make_unique<Fixture>();
    slot->engine = std::make_unique<HybridEngine>(scenario_from_json(oscillator_config(p)));
    slot->field = init_field(*slot->engine);
    slot->effect = init_effect(*slot->engine);
    slot->kraus = measurement_kraus(slot->engine->measurement(), RVec::Constant(1, 0.01), 1e-3);
  }
  return *slot;
}

void BM_MeasurePropagate(benchmark::State& state, bool serial) {
  Fixture& fx = fixture(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  auto blocks = fx.field.blocks;
  for (auto _ : state) {
    if (serial) {
      kernels::serial::measure_propagate(fx.kraus, fx.engine->propagators(), blocks);
    } else {
      kernels::measure_propagate(fx.kraus, fx.engine->propagators(), blocks);
    }
    benchmark::DoNotOptimize(blocks.data());
  }
}

void BM_MixForward(benchmark::State& state, bool serial) {
  Fixture& fx = fixture(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const TransitionKernel& k = fx.engine->kernel(0.0);
  std::vector<CMat> out;
  for (auto _ : state) {
    if (serial) {
      kernels::serial::mix_forward(k, fx.field.blocks, out);
    } else {
      kernels::mix_forward(k, fx.field.blocks, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_PropagateMeasureAdjoint(benchmark::State& state, bool serial) {
  Fixture& fx = fixture(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  auto blocks = fx.effect.blocks;
  for (auto _ : state) {
    if (serial) {
      kernels::serial::propagate_measure_adjoint(fx.kraus, fx.engine->propagators(), blocks);
    } else {
      kernels::propagate_measure_adjoint(fx.kraus, fx.engine->propagators(), blocks);
    }
    benchmark::DoNotOptimize(blocks.data());
  }
}

void BM_FilterStep(benchmark::State& state, bool serial) {
  Fixture& fx = fixture(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  HybridDensityField f = fx.field;
  const RVec dy = RVec::Constant(1, 0.01);
  for (auto _ : state) {
    filter_step(*fx.engine, f, dy, serial ? KernelMode::serial : KernelMode::parallel);
    f.t = 0.0;
  }
}

void sizes(benchmark::internal::Benchmark* b) {
  b->Args({12, 161})->Args({24, 161})->Args({12, 322})->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK_CAPTURE(BM_MeasurePropagate, serial, true)->Apply(sizes);
BENCHMARK_CAPTURE(BM_MeasurePropagate, openmp, false)->Apply(sizes);
BENCHMARK_CAPTURE(BM_MixForward, serial, true)->Apply(sizes);
BENCHMARK_CAPTURE(BM_MixForward, openmp, false)->Apply(sizes);
BENCHMARK_CAPTURE(BM_PropagateMeasureAdjoint, serial, true)->Apply(sizes);
BENCHMARK_CAPTURE(BM_PropagateMeasureAdjoint, openmp, false)->Apply(sizes);
BENCHMARK_CAPTURE(BM_FilterStep, serial, true)->Apply(sizes);
BENCHMARK_CAPTURE(BM_FilterStep, openmp, false)->Apply(sizes);

BENCHMARK_MAIN();
