#include "qsmooth/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "qsmooth/errors.hpp"
#include "qsmooth/rng.hpp"

namespace qsmooth {

namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Strict reader: every access is checked, and keys never read are rejected.
class ConfigObject {
 public:
  ConfigObject(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  double number(const std::string& key) {
    if (!has(key)) throw ConfigError(join(path_, key), "missing required key");
    const json& v = obj_.at(key);
    if (!v.is_number()) throw ConfigError(join(path_, key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(join(path_, key), "must be finite");
    return x;
  }

  double number(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  double positive(const std::string& key) {
    const double x = number(key);
    if (!(x > 0.0)) throw ConfigError(join(path_, key), "must be positive");
    return x;
  }

  double positive(const std::string& key, double fallback) {
    return has(key) ? positive(key) : fallback;
  }

  std::int64_t integer(const std::string& key) {
    if (!has(key)) throw ConfigError(join(path_, key), "missing required key");
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) throw ConfigError(join(path_, key), "expected an integer");
    return v.get<std::int64_t>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    return has(key) ? integer(key) : fallback;
  }

  std::string text(const std::string& key) {
    if (!has(key)) throw ConfigError(join(path_, key), "missing required key");
    const json& v = obj_.at(key);
    if (!v.is_string()) throw ConfigError(join(path_, key), "expected a string");
    return v.get<std::string>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    return has(key) ? text(key) : fallback;
  }

  ConfigObject child(const std::string& key) {
    if (!has(key)) throw ConfigError(join(path_, key), "missing required key");
    return ConfigObject(obj_.at(key), join(path_, key));
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  std::string key_path(const std::string& key) const { return join(path_, key); }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(join(path_, it.key()), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

CMat coherent_state(int dim, Complex alpha) {
  CVec psi(dim);
  Complex amp = std::exp(-0.5 * std::norm(alpha));
  psi(0) = amp;
  for (int n = 1; n < dim; ++n) {
    amp *= alpha / std::sqrt(static_cast<double>(n));
    psi(n) = amp;
  }
  psi.normalize();
  return psi * psi.adjoint();
}

}  // namespace

std::size_t Scenario::steps() const {
  if (!(dt > 0.0)) throw std::invalid_argument("Scenario: dt must be positive");
  if (T < t0) throw std::invalid_argument("Scenario: T must not precede t0");
  const double ratio = (T - t0) / dt;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, n)) {
    throw std::invalid_argument("Scenario: dt does not divide T - t0");
  }
  return static_cast<std::size_t>(n);
}

std::size_t Scenario::effective_stride() const {
  if (snapshot_stride > 0) return snapshot_stride;
  const std::size_t n = steps();
  return n <= 10000 ? 1 : (n + 9999) / 10000;
}

void Scenario::validate() const {
  if (!quantum || !classical || !measurement || !grid) {
    throw std::invalid_argument("Scenario: incomplete model");
  }
  classical->validate();
  if (grid->dim() != classical->n) throw std::invalid_argument("Scenario: grid dimension");
  if (measurement->dim() != quantum->dim()) {
    throw std::invalid_argument("Scenario: measurement and quantum dimensions differ");
  }
  if (rho0.rows() != quantum->dim() || rho0.cols() != quantum->dim()) {
    throw std::invalid_argument("Scenario: rho0 has the wrong shape");
  }
  if (!is_hermitian(rho0, 1e-12) || std::abs(rho0.trace() - Complex(1.0)) > 1e-12) {
    throw std::invalid_argument("Scenario: rho0 must be Hermitian with unit trace");
  }
  (void)steps();
}

std::string hash_config(const json& config) {
  json physical = config;
  physical.erase("seed");
  physical.erase("snapshot_stride");
  physical.erase("id");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(physical.dump())));
  return buf;
}

Scenario scenario_from_json(const json& config) {
  ConfigObject root(config, "");
  Scenario sc;
  json norm;
  sc.id = root.text("id", "scenario");
  norm["id"] = sc.id;

  // quantum
  OscillatorSpec osc;
  json initial_state = "ground";
  {
    ConfigObject q = root.child("quantum");
    osc.omega = q.positive("omega");
    osc.hbar = q.positive("hbar", 1.0);
    const auto fock = q.integer("fock_dim");
    if (fock < 2 || fock > 4096) throw ConfigError(q.key_path("fock_dim"), "must be in [2, 4096]");
    osc.fock_dim = static_cast<int>(fock);
    osc.coupling = q.number("coupling", 1.0);
    if (q.has("dissipators")) {
      const json& list = q.raw("dissipators");
      if (!list.is_array()) throw ConfigError(q.key_path("dissipators"), "expected an array");
      for (std::size_t i = 0; i < list.size(); ++i) {
        ConfigObject d(list[i], q.key_path("dissipators") + "[" + std::to_string(i) + "]");
        DissipatorSpec spec;
        spec.type = d.text("type");
        if (spec.type != "damping" && spec.type != "dephasing") {
          throw ConfigError(d.key_path("type"), "expected \"damping\" or \"dephasing\"");
        }
        spec.rate = d.number("rate");
        if (spec.rate < 0.0) throw ConfigError(d.key_path("rate"), "must be non-negative");
        d.finish();
        osc.dissipators.push_back(spec);
      }
    }
    if (q.has("initial_state")) {
      const json& st = q.raw("initial_state");
      if (st.is_string()) {
        if (st.get<std::string>() != "ground") {
          throw ConfigError(q.key_path("initial_state"), "expected \"ground\" or {\"coherent\": [re, im]}");
        }
      } else {
        ConfigObject s(st, q.key_path("initial_state"));
        const json& c = s.raw("coherent");
        if (!c.is_array() || c.size() != 2 || !c[0].is_number() || !c[1].is_number()) {
          throw ConfigError(s.key_path("coherent"), "expected [re, im]");
        }
        s.finish();
        initial_state = st;
      }
    }
    q.finish();
    json jq;
    jq["omega"] = osc.omega;
    jq["hbar"] = osc.hbar;
    jq["fock_dim"] = osc.fock_dim;
    jq["coupling"] = osc.coupling;
    jq["dissipators"] = json::array();
    for (const auto& d : osc.dissipators) jq["dissipators"].push_back({{"type", d.type}, {"rate", d.rate}});
    jq["initial_state"] = initial_state;
    norm["quantum"] = jq;
  }

  // classical
  {
    ConfigObject c = root.child("classical");
    const std::string preset = c.text("preset");
    const double mean0 = c.number("initial_mean", 0.0);
    json jc;
    jc["preset"] = preset;
    jc["initial_mean"] = mean0;
    double sd0 = 0.0;
    if (preset == "ou") {
      const double lambda = c.positive("lambda");
      const double sigma = c.number("sigma");
      if (sigma < 0.0) throw ConfigError(c.key_path("sigma"), "must be non-negative");
      sd0 = c.has("initial_std") ? c.number("initial_std") : sigma / std::sqrt(2.0 * lambda);
      sc.classical = std::make_shared<ClassicalModel>(
          ClassicalModel::ornstein_uhlenbeck(lambda, sigma, mean0, sd0 * sd0));
      jc["lambda"] = lambda;
      jc["sigma"] = sigma;
    } else if (preset == "random_walk") {
      const double sigma = c.number("sigma");
      if (sigma < 0.0) throw ConfigError(c.key_path("sigma"), "must be non-negative");
      sd0 = c.number("initial_std");
      sc.classical = std::make_shared<ClassicalModel>(
          ClassicalModel::random_walk(sigma, mean0, sd0 * sd0));
      jc["sigma"] = sigma;
    } else if (preset == "constant") {
      sd0 = c.number("initial_std");
      sc.classical = std::make_shared<ClassicalModel>(ClassicalModel::constant(mean0, sd0 * sd0));
    } else {
      throw ConfigError(c.key_path("preset"), "unknown preset \"" + preset +
                                                  "\" (expected ou, random_walk, constant)");
    }
    if (sd0 < 0.0) throw ConfigError(c.key_path("initial_std"), "must be non-negative");
    jc["initial_std"] = sd0;
    c.finish();
    norm["classical"] = jc;

    // grid depends on the prior
    ConfigObject g = root.child("grid");
    const auto points = g.integer("points");
    if (points < 2) throw ConfigError(g.key_path("points"), "must be >= 2");
    GridAxis axis;
    axis.points = static_cast<std::size_t>(points);
    json jg;
    jg["points"] = points;
    if (g.has("half_width_sd")) {
      if (g.has("min") || g.has("max")) {
        throw ConfigError(g.key_path("half_width_sd"), "give either half_width_sd or min/max");
      }
      const double k = g.positive("half_width_sd");
      if (!(sd0 > 0.0)) {
        throw ConfigError(g.key_path("half_width_sd"), "needs a positive prior standard deviation");
      }
      axis.min = mean0 - k * sd0;
      axis.max = mean0 + k * sd0;
      jg["half_width_sd"] = k;
    } else {
      axis.min = g.number("min");
      axis.max = g.number("max");
      if (!(axis.min < axis.max)) throw ConfigError(g.key_path("max"), "must exceed grid.min");
      jg["min"] = axis.min;
      jg["max"] = axis.max;
    }
    g.finish();
    norm["grid"] = jg;
    sc.grid = std::make_shared<ClassicalGrid>(std::vector<GridAxis>{axis});
  }

  // measurement
  double r = 0.0;
  {
    ConfigObject m = root.child("measurement");
    const std::string preset = m.text("preset", "position");
    if (preset != "position") throw ConfigError(m.key_path("preset"), "only \"position\" is supported");
    r = m.positive("R");
    m.finish();
    norm["measurement"] = {{"preset", preset}, {"R", r}};
  }

  // time
  {
    ConfigObject t = root.child("time");
    sc.t0 = t.number("t0", 0.0);
    sc.T = t.number("T");
    sc.dt = t.positive("dt");
    t.finish();
    norm["time"] = {{"t0", sc.t0}, {"T", sc.T}, {"dt", sc.dt}};
    try {
      (void)sc.steps();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("time", e.what());
    }
  }

  const auto stride = root.integer("snapshot_stride", 0);
  if (stride < 0) throw ConfigError("snapshot_stride", "must be non-negative");
  sc.snapshot_stride = static_cast<std::size_t>(stride);
  norm["snapshot_stride"] = stride;
  const auto seed = root.integer("seed", 0);
  sc.seed = static_cast<std::uint64_t>(seed);
  norm["seed"] = seed;
  root.finish();

  // Build models.
  const FockOperators ops = build_fock_operators(osc.fock_dim, osc.omega, osc.hbar);
  CMat number = ops.a_dag * ops.a;
  const CMat h0 = osc.hbar * osc.omega * (number + 0.5 * ops.identity);
  const CMat q = ops.q;
  const double coupling = osc.coupling;
  std::vector<CMat> jumps;
  for (const auto& d : osc.dissipators) {
    if (d.rate == 0.0) continue;
    jumps.push_back(std::sqrt(d.rate) * (d.type == "damping" ? ops.a : number));
  }
  sc.quantum = std::make_shared<QuantumModel>(
      osc.fock_dim, [h0, q, coupling](const RVec& x) -> CMat { return h0 - coupling * x(0) * q; },
      jumps, osc.hbar);
  sc.measurement = std::make_shared<MeasurementModel>(std::vector<CMat>{ops.q},
                                                      RMat::Constant(1, 1, r));
  if (initial_state.is_string()) {
    sc.rho0 = CMat::Zero(osc.fock_dim, osc.fock_dim);
    sc.rho0(0, 0) = 1.0;
  } else {
    const auto& c = initial_state.at("coherent");
    sc.rho0 = coherent_state(osc.fock_dim, Complex(c[0].get<double>(), c[1].get<double>()));
  }
  sc.oscillator = osc;
  sc.config = norm;
  sc.hash = hash_config(norm);
  sc.warnings = grid_width_warnings(*sc.classical, *sc.grid);
  try {
    (void)prior_density(*sc.classical, *sc.grid);
  } catch (const InvalidGrid& e) {
    throw ConfigError("grid", e.what());
  }
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  json config;
  try {
    config = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
  }
  return scenario_from_json(config);
}

json oscillator_config(const OscillatorScenarioParams& p) {
  json cfg;
  cfg["id"] = p.id;
  cfg["quantum"] = {{"omega", p.omega}, {"hbar", p.hbar}, {"fock_dim", p.fock_dim},
                    {"coupling", p.coupling}};
  if (!p.dissipators.empty()) {
    cfg["quantum"]["dissipators"] = json::array();
    for (const auto& d : p.dissipators) {
      cfg["quantum"]["dissipators"].push_back({{"type", d.type}, {"rate", d.rate}});
    }
  }
  json c;
  c["preset"] = p.classical_preset;
  c["initial_mean"] = p.initial_mean;
  if (p.classical_preset == "ou") {
    c["lambda"] = p.lambda;
    c["sigma"] = p.sigma;
  } else if (p.classical_preset == "random_walk") {
    c["sigma"] = p.sigma;
  }
  if (p.initial_std) c["initial_std"] = *p.initial_std;
  cfg["classical"] = c;
  cfg["measurement"] = {{"preset", "position"}, {"R", p.R}};
  cfg["grid"] = {{"points", p.grid_points}, {"half_width_sd", p.grid_half_width_sd}};
  cfg["time"] = {{"t0", p.t0}, {"T", p.T}, {"dt", p.dt}};
  cfg["seed"] = p.seed;
  return cfg;
}

OscillatorScenarioParams lg_preset_params() {
  OscillatorScenarioParams p;
  p.id = "lg-oscillator-ou";
  return p;
}

}  // namespace qsmooth
