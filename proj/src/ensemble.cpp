#include "qsmooth/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <omp.h>

#include "qsmooth/errors.hpp"
#include "qsmooth/forward_filter.hpp"
#include "qsmooth/gaussian_kalman.hpp"
#include "qsmooth/smoother.hpp"

namespace qsmooth {

namespace {

bool needs_grid(const std::vector<std::string>& methods) {
  for (const auto& m : methods) {
    if (m == "filter" || m == "smooth" || m == "retrodict") return true;
  }
  return false;
}

bool has(const std::vector<std::string>& methods, std::string_view name) {
  return std::find(methods.begin(), methods.end(), name) != methods.end();
}

EstimateRow row_from(const SmoothingDensity& s, double loglik, const std::string& name) {
  return {s.t, s.x_mean, s.x_cov, loglik, name, std::nullopt};
}

EstimateRow row_from(const FilterEstimate& e, const std::string& name) {
  return {e.t, e.x_mean, e.x_cov, e.log_likelihood, name, std::nullopt};
}

EstimateRow row_from(const LinearGaussianModel& model, const GaussianMoments& g, double loglik,
                     const std::string& name) {
  const GaussianMoments x = classical_block(model, g);
  return {x.t, x.mean, x.cov, loglik, name, std::nullopt};
}

}  // namespace

const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> names{"filter", "smooth", "retrodict", "kalman",
                                              "kalman-smooth"};
  return names;
}

std::vector<std::string> parse_methods(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    if (!has(known_methods(), item)) {
      throw std::invalid_argument("unknown method \"" + item +
                                  "\" (expected filter, smooth, retrodict, kalman, kalman-smooth)");
    }
    if (!has(out, item)) out.push_back(item);
  }
  if (out.empty()) throw std::invalid_argument("no methods given");
  return out;
}

std::map<std::string, MethodOutput> estimate_methods(const HybridEngine* engine,
                                                     const Scenario& scenario,
                                                     const TrajectoryRecord& record,
                                                     const std::vector<std::string>& methods,
                                                     std::size_t stride,
                                                     std::size_t density_stride) {
  check_record(scenario, record);
  if (needs_grid(methods) && !engine) {
    throw std::invalid_argument("estimate_methods: grid methods need an engine");
  }
  const std::size_t n = record.steps();
  if (stride == 0) stride = scenario.effective_stride();
  const std::vector<std::size_t> steps = snapshot_schedule(n, stride);
  std::map<std::string, MethodOutput> out;
  auto attach = [&](EstimateRow& row, std::size_t out_index, const RVec& density) {
    if (density_stride > 0 && out_index % density_stride == 0) row.density = density;
  };

  if (has(methods, "smooth")) {
    SmoothOptions opts;
    opts.stride = stride;
    const SmoothResult res = smooth_series(*engine, record, opts);
    MethodOutput& sm = out["smooth"];
    sm.steps = steps;
    for (std::size_t j = 0; j < steps.size(); ++j) {
      sm.rows.push_back(row_from(res.smoothed[j], res.log_likelihood, "smooth"));
      attach(sm.rows.back(), j, res.smoothed[j].h);
    }
    if (has(methods, "filter")) {
      MethodOutput& fo = out["filter"];
      fo.steps = steps;
      for (std::size_t j = 0; j < steps.size(); ++j) {
        const FilterEstimate& e = res.forward[steps[j]];
        fo.rows.push_back(row_from(e, "filter"));
        attach(fo.rows.back(), j, e.p_x);
      }
    }
  } else if (has(methods, "filter")) {
    FilterOptions opts;
    opts.keep_snapshots = false;
    const FilterResult res = run_filter(*engine, record, opts);
    MethodOutput& fo = out["filter"];
    fo.steps = steps;
    for (std::size_t j = 0; j < steps.size(); ++j) {
      const FilterEstimate& e = res.estimates[steps[j]];
      fo.rows.push_back(row_from(e, "filter"));
      attach(fo.rows.back(), j, e.p_x);
    }
  }
  if (has(methods, "retrodict")) {
    SmoothOptions opts;
    opts.stride = stride;
    const SmoothResult res = retrodict(*engine, record, opts);
    MethodOutput& ro = out["retrodict"];
    ro.steps = steps;
    for (std::size_t j = 0; j < steps.size(); ++j) {
      ro.rows.push_back(row_from(res.smoothed[j], res.log_likelihood, "retrodict"));
      attach(ro.rows.back(), j, res.smoothed[j].h);
    }
  }
  if (has(methods, "kalman") || has(methods, "kalman-smooth")) {
    const LinearGaussianModel model = derive_lg_model(scenario);
    const auto fwd = kalman_bucy_forward(model, record);
    if (has(methods, "kalman")) {
      MethodOutput& ko = out["kalman"];
      ko.steps = steps;
      for (std::size_t i : steps) {
        ko.rows.push_back(row_from(model, fwd[i], fwd[i].log_likelihood, "kalman"));
      }
    }
    if (has(methods, "kalman-smooth")) {
      const auto bwd = kalman_bucy_backward(model, record);
      const double total = fwd.back().log_likelihood;
      MethodOutput& ks = out["kalman-smooth"];
      ks.steps = steps;
      for (std::size_t i : steps) {
        ks.rows.push_back(row_from(model, mfp_combine(fwd[i], bwd[i]), total, "kalman-smooth"));
      }
    }
  }
  return out;
}

EnsembleSummary run_ensemble(const Scenario& scenario, const EnsembleOptions& options) {
  if (options.runs < 2) throw std::invalid_argument("ensemble needs at least 2 runs");
  if (options.methods.empty()) throw std::invalid_argument("ensemble needs at least one method");
  const std::size_t n = scenario.steps();
  const std::size_t stride = options.stride ? options.stride : scenario.effective_stride();

  EnsembleSummary summary;
  summary.steps = snapshot_schedule(n, stride);
  for (std::size_t i : summary.steps) {
    summary.t.push_back(scenario.t0 + static_cast<double>(i) * scenario.dt);
  }
  summary.runs.resize(options.runs);

  std::unique_ptr<HybridEngine> engine;
  if (needs_grid(options.methods)) engine = std::make_unique<HybridEngine>(scenario);

  auto do_run = [&](std::size_t r) {
    EnsembleRun& run = summary.runs[r];
    run.seed = options.seed0 + r;
    try {
      const TrajectoryRecord rec = simulate_truth(scenario, run.seed);
      const auto outputs =
          estimate_methods(engine.get(), scenario, rec, options.methods, stride, 0);
      for (const auto& [name, mo] : outputs) {
        auto& err = run.sq_error[name];
        auto& var = run.variance[name];
        for (std::size_t j = 0; j < mo.steps.size(); ++j) {
          const std::size_t i = mo.steps[j];
          const RVec& truth = i == 0 ? rec.x_initial : rec.x_true[i - 1];
          err.push_back((mo.rows[j].x_mean - truth).squaredNorm());
          var.push_back(mo.rows[j].x_cov.trace());
        }
      }
      run.ok = true;
    } catch (const std::exception& e) {
      run.ok = false;
      run.error = e.what();
      run.sq_error.clear();
      run.variance.clear();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(options.parallelism,
                                                           static_cast<unsigned>(options.runs)));
  if (workers == 1) {
    for (std::size_t r = 0; r < options.runs; ++r) do_run(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        // runs are the unit of parallelism; keep each run's kernels single-threaded
        omp_set_num_threads(1);
        for (std::size_t r = next++; r < options.runs; r = next++) do_run(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  const std::size_t points = summary.steps.size();
  for (const auto& name : options.methods) {
    std::vector<double> sum(points, 0.0), sum_sq(points, 0.0), sum_var(points, 0.0);
    std::size_t count = 0;
    for (const auto& run : summary.runs) {
      if (!run.ok) continue;
      ++count;
      const auto& err = run.sq_error.at(name);
      const auto& var = run.variance.at(name);
      for (std::size_t j = 0; j < points; ++j) {
        sum[j] += err[j];
        sum_sq[j] += err[j] * err[j];
        sum_var[j] += var[j];
      }
    }
    auto& mse = summary.mse[name];
    auto& se = summary.se[name];
    auto& mv = summary.mean_var[name];
    for (std::size_t j = 0; j < points; ++j) {
      if (count == 0) {
        mse.push_back(std::nan(""));
        se.push_back(std::nan(""));
        mv.push_back(std::nan(""));
        continue;
      }
      const double c = static_cast<double>(count);
      const double mean = sum[j] / c;
      const double var = count > 1 ? std::max(0.0, (sum_sq[j] - c * mean * mean) / (c - 1.0)) : 0.0;
      mse.push_back(mean);
      se.push_back(std::sqrt(var / c));
      mv.push_back(sum_var[j] / c);
    }
  }
  for (const auto& run : summary.runs) {
    if (!run.ok) ++summary.failures;
  }
  return summary;
}

double window_mean(const std::vector<double>& t, const std::vector<double>& series, double t_lo,
                   double t_hi) {
  if (t.size() != series.size()) throw std::invalid_argument("window_mean: size mismatch");
  double s = 0.0;
  std::size_t c = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= t_lo && t[i] <= t_hi) {
      s += series[i];
      ++c;
    }
  }
  if (c == 0) throw std::invalid_argument("window_mean: empty window");
  return s / static_cast<double>(c);
}

}  // namespace qsmooth
