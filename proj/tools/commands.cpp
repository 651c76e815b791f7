#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <omp.h>

#include "json.hpp"
#include "qsmooth/backward_filter.hpp"
#include "qsmooth/csv_format.hpp"
#include "qsmooth/discrete_oracle.hpp"
#include "qsmooth/ensemble.hpp"
#include "qsmooth/errors.hpp"
#include "qsmooth/estimate_io.hpp"
#include "qsmooth/forward_filter.hpp"
#include "qsmooth/gaussian_kalman.hpp"
#include "qsmooth/record_io.hpp"
#include "qsmooth/scenario.hpp"
#include "qsmooth/truth_simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace qsmooth::cli {

namespace {

void print_warnings(const Scenario& sc) {
  for (const auto& w : sc.warnings) std::cerr << "warning: " << w << '\n';
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw std::runtime_error("cannot create output directory " + dir);
  return p;
}

fs::path record_stem(const std::string& arg) {
  fs::path p(arg);
  if (fs::is_directory(p)) return p / "record";
  const std::string s = p.string();
  for (const char* suffix : {".meta.json", ".csv"}) {
    const std::string suf(suffix);
    if (s.size() > suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0) {
      return fs::path(s.substr(0, s.size() - suf.size()));
    }
  }
  return p;
}

json matrix_json(const RMat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

int cmd_simulate(const SimulateArgs& args) {
  Scenario sc = load_scenario(args.config);
  print_warnings(sc);
  const std::uint64_t seed = args.seed.value_or(sc.seed);
  const fs::path out = ensure_dir(args.out);
  const TrajectoryRecord rec = simulate_truth(sc, seed);
  write_record(rec, out / "record");
  json cfg = sc.config;
  cfg["seed"] = seed;
  write_text(out / "scenario.json", cfg.dump(2) + "\n");

  double sum_sq = 0.0;
  std::size_t count = 0;
  for (const auto& dy : rec.dy) {
    sum_sq += dy.squaredNorm();
    count += static_cast<std::size_t>(dy.size());
  }
  const double rms = count ? std::sqrt(sum_sq / static_cast<double>(count)) : 0.0;
  std::cout << "record: " << (out / "record.csv").string() << '\n'
            << "steps=" << rec.steps() << " dt=" << format_double(rec.dt)
            << " rms_dy=" << format_double(rms) << " seed=" << seed
            << " scenario_hash=" << sc.hash << '\n';
  return kOk;
}

int cmd_estimate(const EstimateArgs& args) {
  Scenario sc = load_scenario(args.config);
  print_warnings(sc);
  const TrajectoryRecord rec = read_record(record_stem(args.record));
  if (rec.scenario_hash != sc.hash) {
    std::cerr << "error: record was produced by scenario " << rec.scenario_hash
              << " but the config describes scenario " << sc.hash << "; refusing to run\n";
    return kConfigError;
  }
  const auto methods = parse_methods(args.methods);
  const fs::path out = ensure_dir(args.out);

  std::unique_ptr<HybridEngine> engine;
  for (const auto& m : methods) {
    if (m == "filter" || m == "smooth" || m == "retrodict") {
      engine = std::make_unique<HybridEngine>(sc);
      break;
    }
  }
  const std::size_t stride = args.stride ? args.stride : sc.effective_stride();
  const auto outputs =
      estimate_methods(engine.get(), sc, rec, methods, stride, args.density_stride);
  for (const auto& name : methods) {
    const MethodOutput& mo = outputs.at(name);
    // rows align with the record rows t_1..t_N; an empty record keeps the prior row
    std::vector<EstimateRow> rows(mo.rows.begin() + (rec.steps() > 0 ? 1 : 0), mo.rows.end());
    const fs::path file = out / ("estimate_" + name + ".csv");
    write_estimate_csv(file, rows, sc.hash);
    const EstimateRow& last = rows.back();
    std::cout << name << ": " << rows.size() << " rows -> " << file.string()
              << "  (t=" << format_double(last.t) << " mean=" << format_double(last.x_mean(0))
              << " var=" << format_double(last.x_cov(0, 0)) << ")\n";
  }

  if (!args.snapshot_dir.empty()) {
    if (!engine) engine = std::make_unique<HybridEngine>(sc);
    const fs::path dir = ensure_dir(args.snapshot_dir);
    FilterOptions opts;
    opts.snapshot_stride = stride;
    const FilterResult fwd = run_filter(*engine, rec, opts);
    const BackwardResult bwd = run_backward(*engine, rec, opts);
    for (std::size_t j = 0; j < fwd.snapshots.size(); ++j) {
      const std::string step = std::to_string(fwd.snapshot_steps[j]);
      write_snapshot(dir / ("snapshot_" + step + "_forward.txt"), fwd.snapshots[j], "forward");
      write_snapshot(dir / ("snapshot_" + step + "_backward.txt"), bwd.snapshots[j], "backward");
    }
    std::cout << "snapshots: " << fwd.snapshots.size() << " pairs -> " << dir.string() << '\n';
  }
  return kOk;
}

int cmd_ensemble(const EnsembleArgs& args) {
  Scenario sc = load_scenario(args.config);
  print_warnings(sc);
  EnsembleOptions opts;
  opts.methods = parse_methods(args.methods);
  opts.runs = args.runs;
  opts.seed0 = args.seed;
  opts.parallelism = args.parallelism;
  opts.stride = args.stride;
  if (opts.runs < 2) throw ConfigError("runs", "an ensemble needs at least 2 runs");
  const fs::path out = ensure_dir(args.out);

  const EnsembleSummary summary = run_ensemble(sc, opts);

  {
    std::ofstream f(out / "summary.csv", std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write summary.csv");
    f << "# schema=qsmooth.ensemble/1 scenario_hash=" << sc.hash << " runs=" << opts.runs
      << " failures=" << summary.failures << " seed0=" << opts.seed0 << " tool=qsmooth "
      << kToolVersion << '\n';
    std::vector<std::string> header{"t"};
    for (const auto& m : opts.methods) {
      header.push_back("mse_" + m);
      header.push_back("se_" + m);
      header.push_back("mean_var_" + m);
    }
    f << join_csv(header) << '\n';
    for (std::size_t j = 0; j < summary.t.size(); ++j) {
      std::vector<std::string> cells{format_double(summary.t[j])};
      for (const auto& m : opts.methods) {
        cells.push_back(format_double(summary.mse.at(m)[j]));
        cells.push_back(format_double(summary.se.at(m)[j]));
        cells.push_back(format_double(summary.mean_var.at(m)[j]));
      }
      f << join_csv(cells) << '\n';
    }
  }
  {
    std::ofstream f(out / "runs.csv", std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write runs.csv");
    f << "# schema=qsmooth.ensemble-runs/1 scenario_hash=" << sc.hash << " tool=qsmooth "
      << kToolVersion << '\n';
    std::vector<std::string> header{"seed", "status"};
    for (const auto& m : opts.methods) header.push_back("mse_" + m);
    header.push_back("error");
    f << join_csv(header) << '\n';
    for (const auto& run : summary.runs) {
      std::vector<std::string> cells{std::to_string(run.seed), run.ok ? "ok" : "failed"};
      for (const auto& m : opts.methods) {
        if (!run.ok) {
          cells.emplace_back();
          continue;
        }
        const auto& e = run.sq_error.at(m);
        double s = 0.0;
        for (double v : e) s += v;
        cells.push_back(format_double(s / static_cast<double>(e.size())));
      }
      std::string msg = run.error;
      for (char& c : msg) {
        if (c == ',' || c == '\n') c = ';';
      }
      cells.push_back(msg);
      f << join_csv(cells) << '\n';
    }
  }

  const double t0 = sc.t0, T = sc.T;
  const double lo = t0 + 0.25 * (T - t0), hi = t0 + 0.75 * (T - t0);
  std::cout << "runs=" << opts.runs << " failures=" << summary.failures << '\n';
  for (const auto& m : opts.methods) {
    std::cout << m << ": mid-interval mse=" << format_double(window_mean(summary.t, summary.mse.at(m), lo, hi))
              << " final mse=" << format_double(summary.mse.at(m).back()) << " (se "
              << format_double(summary.se.at(m).back()) << ")\n";
  }
  std::cout << "summary -> " << (out / "summary.csv").string() << '\n';
  if (static_cast<double>(summary.failures) > 0.1 * static_cast<double>(opts.runs)) {
    std::cerr << "error: " << summary.failures << " of " << opts.runs << " runs failed\n";
    return kPartialEnsemble;
  }
  return kOk;
}

int cmd_oracle_check(const OracleCheckArgs& args) {
  const MatchedInstance inst;
  constexpr double kExactTolerance = 1e-12;
  if (args.inject_dt_mismatch) {
    // the record is sampled at half the scenario's dt; the pipeline must refuse it
    const Scenario sc = matched_scenario(inst, 1e-2);
    const HybridEngine engine(sc);
    const TrajectoryRecord rec = matched_record(inst, 5e-3);
    try {
      (void)run_filter(engine, rec);
    } catch (const std::invalid_argument& e) {
      std::cout << "FAIL: mismatched dt rejected: " << e.what() << '\n';
      return kFailure;
    }
    std::cout << "FAIL: mismatched record was accepted\n";
    return kFailure;
  }
  if (args.steps > 0) {
    const double err = exact_factor_check(inst, 1e-2, args.steps);
    const bool ok = err < kExactTolerance;
    std::cout << (ok ? "PASS" : "FAIL") << ": " << args.steps
              << "-step pipeline vs oracle from the same factors, max |dh| = " << err << '\n';
    return ok ? kOk : kFailure;
  }

  const DiscreteScenario ds = matched_oracle(inst);
  const auto rec = matched_oracle_record(inst);
  const auto f_enum = enumerate_forward(ds, rec);
  const auto f_rec = recursive_forward(ds, rec);
  const auto eff = enumerate_effect(ds, rec);
  double path_vs_recursion = 0.0, pairing_drift = 0.0;
  const double pair0 = oracle_pairing(eff[0], f_enum[0]);
  for (std::size_t t = 0; t < f_enum.size(); ++t) {
    for (std::size_t k = 0; k < f_enum[t].size(); ++k) {
      path_vs_recursion = std::max(path_vs_recursion, (f_enum[t][k] - f_rec[t][k]).cwiseAbs().maxCoeff());
    }
    pairing_drift = std::max(pairing_drift, std::abs(oracle_pairing(eff[t], f_enum[t]) - pair0) / pair0);
  }
  const auto h_oracle = oracle_smooth(ds, rec);
  const auto h_brute = brute_force_smooth(ds, rec);
  double brute = 0.0;
  for (std::size_t t = 0; t < h_oracle.size(); ++t) {
    brute = std::max(brute, (h_oracle[t] - h_brute[t]).cwiseAbs().maxCoeff());
  }
  std::cout << "oracle self-consistency: path-sum vs recursion " << path_vs_recursion
            << ", pairing drift " << pairing_drift << ", effect vs brute force " << brute << '\n';
  bool ok = path_vs_recursion < kExactTolerance && pairing_drift < kExactTolerance &&
            brute < kExactTolerance;

  std::vector<double> dts;
  for (std::size_t j = 0; j < args.levels; ++j) dts.push_back(1e-2 / std::pow(2.0, double(j)));
  const ConvergenceReport report = convergence_ladder(inst, dts);
  for (std::size_t j = 0; j < report.rungs.size(); ++j) {
    std::cout << "dt=" << format_double(report.rungs[j].dt)
              << " L1 error=" << report.rungs[j].error;
    if (j > 0) std::cout << " order=" << report.orders[j - 1];
    std::cout << '\n';
  }
  if (report.rungs.size() >= 2) {
    std::cout << "observed order " << report.fitted_order << '\n';
    ok = ok && report.fitted_order >= 0.75 && report.fitted_order <= 1.25;
  }
  const double exact = exact_factor_check(inst, 1e-2, 3);
  std::cout << "3-step pipeline vs oracle from the same factors, max |dh| = " << exact << '\n';
  ok = ok && exact < kExactTolerance;
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kOk : kFailure;
}

int cmd_derive_lg(const DeriveLgArgs& args) {
  const Scenario sc = load_scenario(args.config);
  const LinearGaussianModel m = derive_lg_model(sc);
  json j;
  json state = json::array({"q", "p"});
  for (int i = 0; i < sc.classical->n; ++i) state.push_back("x[" + std::to_string(i) + "]");
  j["state"] = state;
  j["F"] = matrix_json(m.F);
  j["N"] = matrix_json(m.N);
  j["H"] = matrix_json(m.H);
  j["R"] = matrix_json(m.R);
  j["m0"] = matrix_json(m.m0);
  j["P0"] = matrix_json(m.P0);
  j["scenario_hash"] = sc.hash;
  const std::string text = j.dump(2) + "\n";
  if (args.out.empty()) {
    std::cout << text;
  } else {
    const fs::path out = ensure_dir(args.out);
    write_text(out / "lg_model.json", text);
    std::cout << "model -> " << (out / "lg_model.json").string() << '\n';
  }
  return kOk;
}

}  // namespace qsmooth::cli
