#include <cmath>

#include "doctest.h"
#include "qsmooth/ensemble.hpp"
#include "qsmooth/gaussian_kalman.hpp"
#include "qsmooth/smoother.hpp"
#include "support.hpp"

using namespace qsmooth;

namespace {

Scenario tiny_lg() {
  return scenario_from_json(oscillator_config(testing::lg_small(8, 41, 0.4, 2e-3)));
}

}  // namespace

TEST_CASE("method lists") {
  CHECK(known_methods() ==
        std::vector<std::string>{"filter", "smooth", "retrodict", "kalman", "kalman-smooth"});
  CHECK(parse_methods("smooth,filter,smooth") == std::vector<std::string>{"smooth", "filter"});
  CHECK(parse_methods("kalman") == std::vector<std::string>{"kalman"});
  CHECK_THROWS_AS(parse_methods("filter,rts"), std::invalid_argument);
  CHECK_THROWS_AS(parse_methods(""), std::invalid_argument);
}

TEST_CASE("estimate_methods samples every method at the output steps") {
  const Scenario sc = tiny_lg();
  const HybridEngine engine(sc);
  const TrajectoryRecord rec = simulate_truth(sc, 5);
  const auto out = estimate_methods(&engine, sc, rec, known_methods(), 40, 2);
  REQUIRE(out.size() == 5);
  for (const auto& [name, mo] : out) {
    CAPTURE(name);
    CHECK(mo.steps == std::vector<std::size_t>{0, 40, 80, 120, 160, 200});
    REQUIRE(mo.rows.size() == 6);
    CHECK(mo.rows.back().t == doctest::Approx(0.4));
    CHECK(mo.rows[0].estimator == name);
  }
  // densities on every second row of the grid methods only
  CHECK(out.at("smooth").rows[0].density.has_value());
  CHECK_FALSE(out.at("smooth").rows[1].density.has_value());
  CHECK_FALSE(out.at("kalman").rows[0].density.has_value());

  // same numbers as the underlying passes
  const FilterResult f = run_filter(engine, rec, {.keep_snapshots = false});
  CHECK(out.at("filter").rows[3].x_mean == f.estimates[120].x_mean);
  CHECK(out.at("smooth").rows.back().x_mean(0) ==
        doctest::Approx(out.at("filter").rows.back().x_mean(0)).epsilon(1e-10));
  const LinearGaussianModel lg = derive_lg_model(sc);
  const auto kf = kalman_bucy_forward(lg, rec);
  CHECK(out.at("kalman").rows[2].x_mean(0) == kf[80].mean(2));
  CHECK(out.at("kalman").rows[2].x_cov(0, 0) == kf[80].cov(2, 2));

  CHECK_THROWS_AS(estimate_methods(nullptr, sc, rec, {"filter"}, 40), std::invalid_argument);
  CHECK_NOTHROW(estimate_methods(nullptr, sc, rec, {"kalman", "kalman-smooth"}, 40));
}

TEST_CASE("run_ensemble: statistics and independence of the worker count") {
  const Scenario sc = tiny_lg();
  EnsembleOptions opt;
  opt.methods = {"filter", "smooth", "kalman"};
  opt.runs = 4;
  opt.seed0 = 10;
  opt.stride = 50;
  const EnsembleSummary one = run_ensemble(sc, opt);
  opt.parallelism = 3;
  const EnsembleSummary three = run_ensemble(sc, opt);

  REQUIRE(one.runs.size() == 4);
  CHECK(one.failures == 0);
  CHECK(one.steps == std::vector<std::size_t>{0, 50, 100, 150, 200});
  CHECK(one.t.back() == doctest::Approx(0.4));
  for (std::size_t r = 0; r < 4; ++r) {
    CHECK(one.runs[r].seed == 10 + r);
    CHECK(three.runs[r].seed == 10 + r);
    CHECK(one.runs[r].sq_error.at("smooth") == three.runs[r].sq_error.at("smooth"));
  }
  CHECK(one.mse.at("filter") == three.mse.at("filter"));
  CHECK(one.se.at("kalman") == three.se.at("kalman"));

  // mse is the mean of the per-run squared errors
  for (std::size_t j = 0; j < one.steps.size(); ++j) {
    double s = 0.0;
    for (const auto& run : one.runs) s += run.sq_error.at("filter")[j];
    CHECK(one.mse.at("filter")[j] == doctest::Approx(s / 4.0).epsilon(1e-14));
    CHECK(one.se.at("filter")[j] >= 0.0);
    CHECK(one.mean_var.at("filter")[j] > 0.0);
  }
  // the record is the simulated one: truth errors differ between seeds
  CHECK(one.runs[0].sq_error.at("filter")[2] != one.runs[1].sq_error.at("filter")[2]);

  CHECK(window_mean(one.t, one.mse.at("filter"), 0.1, 0.3) ==
        doctest::Approx((one.mse.at("filter")[1] + one.mse.at("filter")[2] +
                         one.mse.at("filter")[3]) / 3.0));
  CHECK_THROWS_AS(window_mean(one.t, one.mse.at("filter"), 0.11, 0.12), std::invalid_argument);

  opt.runs = 1;
  CHECK_THROWS_AS(run_ensemble(sc, opt), std::invalid_argument);
}

TEST_CASE("run_ensemble records failed runs") {
  // a grid the config loader would refuse: every grid run fails on the prior
  Scenario narrow = scenario_from_json(oscillator_config(testing::lg_small(8, 41, 0.1, 2e-3)));
  narrow.grid = std::make_shared<ClassicalGrid>(std::vector<GridAxis>{{-0.5, 0.5, 21}});
  narrow.hash = "custom";
  EnsembleOptions opt;
  opt.methods = {"filter", "kalman"};
  opt.runs = 3;
  const EnsembleSummary s = run_ensemble(narrow, opt);
  CHECK(s.failures == 3);
  for (const auto& run : s.runs) {
    CHECK_FALSE(run.ok);
    CHECK(run.error.find("prior mass off the grid") != std::string::npos);
  }
  CHECK(std::isnan(s.mse.at("filter")[0]));
}
