#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsmooth/classical_dynamics.hpp"
#include "qsmooth/operator_core.hpp"

namespace qsmooth {

struct DissipatorSpec {
  std::string type;  // "damping" (sqrt(rate) a) or "dephasing" (sqrt(rate) a^dag a)
  double rate = 0.0;
};

/// Oscillator-force class: H(x) = hbar omega (a^dag a + 1/2) - coupling x_0 q,
/// position readout C = q.
struct OscillatorSpec {
  double omega = 1.0;
  double hbar = 1.0;
  int fock_dim = 12;
  double coupling = 1.0;
  std::vector<DissipatorSpec> dissipators;
};

/// Everything an experiment needs: models, discretisation and prior.
/// Built either from a JSON config or directly in code.
struct Scenario {
  std::string id = "scenario";
  std::shared_ptr<const QuantumModel> quantum;
  std::shared_ptr<const ClassicalModel> classical;
  std::shared_ptr<const MeasurementModel> measurement;
  std::shared_ptr<const ClassicalGrid> grid;
  CMat rho0;
  double t0 = 0.0;
  double T = 1.0;
  double dt = 1e-3;
  std::size_t snapshot_stride = 0;  // 0: automatic
  std::uint64_t seed = 0;
  std::optional<OscillatorSpec> oscillator;

  /// Normalised config (defaults filled in); null for scenarios built in code.
  nlohmann::json config;
  /// Hash of the model and discretisation (seed and stride excluded).
  std::string hash = "custom";
  std::vector<std::string> warnings;

  /// Number of record increments, (T - t0) / dt. Throws std::invalid_argument
  /// when dt does not divide the interval.
  std::size_t steps() const;
  /// Snapshot stride after resolving the automatic default.
  std::size_t effective_stride() const;

  /// Checks cross-model consistency (dimensions, rho0 is a density matrix).
  void validate() const;
};

/// Parses and validates a config. Unknown keys are rejected; errors are
/// ConfigError carrying the dotted key path.
Scenario scenario_from_json(const nlohmann::json& config);
Scenario load_scenario(const std::filesystem::path& path);

/// Parameters of the oscillator + classical-force family used by the presets.
struct OscillatorScenarioParams {
  std::string id = "oscillator-force";
  double omega = 1.0;
  double hbar = 1.0;
  int fock_dim = 12;
  double coupling = 1.0;
  std::string classical_preset = "ou";  // "ou", "random_walk", "constant"
  double lambda = 0.2;
  double sigma = 0.5;
  double initial_mean = 0.0;
  std::optional<double> initial_std;  // default: OU stationary sd
  double R = 0.5;
  std::size_t grid_points = 161;
  double grid_half_width_sd = 5.0;
  double t0 = 0.0;
  double T = 10.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  std::vector<DissipatorSpec> dissipators;
};

nlohmann::json oscillator_config(const OscillatorScenarioParams& params);

/// The linear-Gaussian demo preset: omega = hbar = 1, OU force lambda = 0.2,
/// sigma = 0.5, R = 0.5, 161-point grid over +-5 stationary sd, dt = 1e-3,
/// T = 10.
OscillatorScenarioParams lg_preset_params();

std::string hash_config(const nlohmann::json& config);

}  // namespace qsmooth
