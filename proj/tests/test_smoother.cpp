#include <cmath>
#include <random>

#include "doctest.h"
#include "qsmooth/discrete_oracle.hpp"
#include "qsmooth/errors.hpp"
#include "qsmooth/smoother.hpp"
#include "support.hpp"

using namespace qsmooth;

namespace {

testing::SmallSpec wide_spec(int dim, std::size_t points) {
  testing::SmallSpec s;
  s.dim = dim;
  s.points = points;
  s.half_width = 3.0;
  return s;
}

double max_diff(const RVec& a, const RVec& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("combine: edge cases") {
  const Scenario sc = testing::small_scenario(wide_spec(3, 21));
  const HybridEngine engine(sc);
  const HybridDensityField f = init_field(engine);
  EffectField g = init_effect(engine);
  g.t = f.t;

  // a flat effect returns the classical marginal
  const SmoothingDensity flat = combine(f, g);
  const FilterEstimate e = estimate(f);
  CHECK(max_diff(flat.h, e.p_x) < 1e-13);
  CHECK(flat.x_mean(0) == doctest::Approx(e.x_mean(0)).epsilon(1e-13));
  CHECK(flat.x_cov(0, 0) == doctest::Approx(e.x_cov(0, 0)).epsilon(1e-13));

  // a delta forward field pins the posterior
  HybridDensityField delta = f;
  for (auto& b : delta.blocks) b.setZero();
  delta.blocks[7] = sc.rho0;
  const SmoothingDensity pinned = combine(delta, g);
  CHECK(pinned.h(7) * sc.grid->cell_volume() == doctest::Approx(1.0));
  CHECK(pinned.x_mean(0) == doctest::Approx(sc.grid->point(7)(0)));
  CHECK(pinned.x_cov(0, 0) == doctest::Approx(0.0));

  // no overlap between the supports
  EffectField disjoint = g;
  disjoint.blocks[7].setZero();
  CHECK_THROWS_AS(combine(delta, disjoint), NumericalError);

  EffectField late = g;
  late.t = 0.5;
  CHECK_THROWS_AS(combine(f, late), std::invalid_argument);

  testing::SmallSpec other = wide_spec(3, 23);
  const HybridEngine e2(testing::small_scenario(other));
  EffectField elsewhere = init_effect(e2);
  elsewhere.t = f.t;
  CHECK_THROWS_AS(combine(f, elsewhere), std::invalid_argument);

  // a skew-Hermitian effect gives an imaginary overlap
  EffectField skew = g;
  for (auto& b : skew.blocks) b = Complex(0.0, 1.0) * CMat::Identity(3, 3);
  skew.blocks[0] += CMat::Identity(3, 3);
  CHECK_THROWS_AS(combine(f, skew), NumericalError);
}

TEST_CASE("smooth_series against path enumeration") {
  for (bool dissipative : {false, true}) {
    CAPTURE(dissipative);
    testing::SmallSpec s = wide_spec(3, 4);
    s.dt = 0.05;
    s.T = 0.15;
    s.sigma = 2.0;
    s.dissipative = dissipative;
    const Scenario sc = testing::small_scenario(s);
    const HybridEngine engine(sc);
    const TrajectoryRecord rec = testing::random_record(sc, 12, 3.0);
    REQUIRE(rec.steps() == 3);
    const SmoothResult res = smooth_series(engine, rec, {.stride = 1});
    REQUIRE(res.smoothed.size() == 4);

    const DiscreteScenario ds = discrete_from_engine(engine);
    const auto oracle = oracle_smooth(ds, rec.dy);
    const auto brute = brute_force_smooth(ds, rec.dy);
    const double cellvol = sc.grid->cell_volume();
    for (std::size_t tau = 0; tau < 4; ++tau) {
      CAPTURE(tau);
      const RVec h = res.smoothed[tau].h * cellvol;
      CHECK(max_diff(h, oracle[tau]) < 1e-10);
      CHECK(max_diff(h, brute[tau]) < 1e-10);
    }
    // likelihood: trace of the enumerated unnormalised final field
    const auto fwd = enumerate_forward(ds, rec.dy);
    double z = 0.0;
    for (const auto& b : fwd.back()) z += b.trace().real();
    CHECK(res.log_likelihood == doctest::Approx(std::log(z)).epsilon(1e-10));
    // the entries are genuinely different laws
    CHECK(max_diff(oracle[0], oracle[3]) > 1e-3);
  }
}

TEST_CASE("smooth_series: endpoints, modes and likelihood") {
  testing::SmallSpec s = wide_spec(3, 41);
  s.T = 1.2;
  const Scenario sc = testing::small_scenario(s);
  const HybridEngine engine(sc);
  const TrajectoryRecord rec = testing::random_record(sc, 5, 1.5);
  const FilterResult filt = run_filter(engine, rec, {.snapshot_stride = 1});
  const SmoothResult direct = smooth_series(engine, rec, {.stride = 7});
  CHECK(direct.steps == std::vector<std::size_t>{0, 7, 14, 21, 28, 35, 42, 49, 56, 63, 70,
                                                  77, 84, 91, 98, 105, 112, 119, 120});
  REQUIRE(direct.smoothed.size() == direct.steps.size());
  REQUIRE(direct.forward.size() == 121);

  // at T the smoother is the filter
  CHECK(max_diff(direct.smoothed.back().h, filt.estimates.back().p_x) < 1e-12);
  CHECK(direct.smoothed.back().t == doctest::Approx(1.2));
  CHECK(direct.log_likelihood == doctest::Approx(filt.final_field.log_weight).epsilon(1e-10));
  CHECK(direct.max_imag_residue < 1e-12);
  for (std::size_t i = 0; i <= rec.steps(); ++i)
    CHECK(direct.forward[i].x_mean == filt.estimates[i].x_mean);

  // smoothing laws do not depend on how the forward fields are stored
  for (std::size_t interval : {0, 1, 5, 11, 200}) {
    CAPTURE(interval);
    SmoothOptions opt;
    opt.stride = 7;
    opt.direct_budget_bytes = 0;
    opt.checkpoint_interval = interval;
    const SmoothResult ck = smooth_series(engine, rec, opt);
    REQUIRE(ck.smoothed.size() == direct.smoothed.size());
    double worst = 0.0;
    for (std::size_t j = 0; j < ck.smoothed.size(); ++j) {
      worst = std::max(worst, max_diff(ck.smoothed[j].h, direct.smoothed[j].h));
      CHECK(ck.smoothed[j].t == direct.smoothed[j].t);
    }
    CHECK(worst == 0.0);
    CHECK(ck.log_likelihood == direct.log_likelihood);
  }

  SmoothOptions ser;
  ser.stride = 7;
  ser.mode = KernelMode::serial;
  const SmoothResult serial = smooth_series(engine, rec, ser);
  CHECK(max_diff(serial.smoothed[3].h, direct.smoothed[3].h) < 1e-10);

  TrajectoryRecord empty = rec;
  empty.T = empty.t0;
  empty.dy.clear();
  empty.x_true.clear();
  const SmoothResult none = smooth_series(engine, empty);
  REQUIRE(none.smoothed.size() == 1);
  CHECK(none.log_likelihood == 0.0);
  CHECK(max_diff(none.smoothed[0].h, filt.estimates[0].p_x) < 1e-13);
}

TEST_CASE("retrodict: effect against the measurement-free prior") {
  testing::SmallSpec s = wide_spec(3, 41);
  s.T = 0.5;
  const Scenario sc = testing::small_scenario(s);
  const HybridEngine engine(sc);
  const TrajectoryRecord rec = testing::random_record(sc, 3, 1.5);
  const SmoothResult r = retrodict(engine, rec, {.stride = 10});
  const auto prior = predict_ahead(engine, init_field(engine), sc.T);
  REQUIRE(r.forward.size() == prior.size());
  CHECK(max_diff(r.forward.back().p_x, prior.back().p_x) < 1e-12);
  CHECK(max_diff(r.smoothed.back().h, prior.back().p_x) < 1e-12);

  // a silent readout leaves the prior untouched everywhere
  Scenario silent = sc;
  silent.measurement = std::make_shared<MeasurementModel>(std::vector<CMat>{CMat::Zero(3, 3)},
                                                          RMat::Constant(1, 1, s.R));
  const HybridEngine es(silent);
  const SmoothResult q = retrodict(es, rec, {.stride = 10});
  for (std::size_t j = 0; j < q.steps.size(); ++j)
    CHECK(max_diff(q.smoothed[j].h, prior[q.steps[j]].p_x) < 1e-10);

  // with a record, retrodiction moves the t0 law away from the prior
  CHECK(max_diff(r.smoothed.front().h, prior.front().p_x) > 1e-4);
}

TEST_CASE("smoothing narrows the posterior on a simulated trajectory") {
  const Scenario sc = scenario_from_json(oscillator_config(testing::lg_small(12, 81, 4.0, 2e-3)));
  const HybridEngine engine(sc);
  const TrajectoryRecord rec = simulate_truth(sc, 3);
  const SmoothResult res = smooth_series(engine, rec, {.stride = 100});
  int narrower = 0, interior = 0;
  for (std::size_t j = 1; j + 1 < res.steps.size(); ++j) {
    const std::size_t i = res.steps[j];
    ++interior;
    if (res.smoothed[j].x_cov(0, 0) < res.forward[i].x_cov(0, 0)) ++narrower;
  }
  CHECK(interior == 19);
  CHECK(narrower == interior);
  const double ft = res.forward.back().x_cov(0, 0);
  CHECK(res.smoothed.back().x_cov(0, 0) == doctest::Approx(ft).epsilon(1e-10));
}
