#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vqd/adiabatic.hpp"
#include "vqd/fga.hpp"
#include "vqd/mctdh.hpp"
#include "vqd/tdh.hpp"

namespace vqd::scenario {

enum class Kind { fga, tdh, adiabatic, mctdh_spawn, exact_only };

std::string kind_name(Kind k);

struct GridSpec {
  double x_min = -1.0;
  double x_max = 1.0;
  int n_points = 0;
  Boundary boundary = Boundary::boxed;
};

struct PotentialSpec {
  std::string type;  ///< harmonic | quartic | polynomial | csv
  double omega = 1.0;
  double center = 0.0;
  double coefficient = 0.25;
  std::vector<double> coeffs;
  std::string path;
};

struct GaussianSpec {
  double center = 0.0;
  double momentum = 0.0;
  double width = 1.0;
};

struct ModeSpec {
  GridSpec grid;
  double mass = 1.0;
  PotentialSpec potential;
  GaussianSpec initial;               // tdh
  std::vector<GaussianSpec> spfs;     // mctdh
};

struct CouplingSpec {
  std::string type = "none";  ///< none | bilinear | csv2d
  double c = 0.0;
  std::string path;
};

struct ModelSpec {
  std::string type;  ///< avoided_crossing_tanh | linear_vibronic | csv
  double amplitude = 0.0, width = 1.0, gap = 0.0, coupling_width = 1.0;
  double delta = 0.0, kappa1 = 0.0, kappa2 = 0.0, coupling = 0.0;
  std::string path;
};

struct ScheduleSpec {
  std::string type = "none";  ///< none | linear | sinusoidal
  double rate = 0.0;
  double amplitude = 0.0;
};

struct SpawnSpec {
  double threshold = 0.0;
  int max_spfs = 3;
};

struct ScenarioConfig {
  Kind kind = Kind::exact_only;
  std::string name;
  double hbar = 1.0;
  std::uint64_t seed = 0;
  double t_final = 0.0;
  int n_samples = 200;
  OdeOptions integrator;
  bool oracle = true;
  bool export_amplitudes = false;

  // fga / adiabatic / exact-only
  GridSpec grid;
  double mass = 1.0;
  PotentialSpec potential;

  // fga
  cdouble z0{0.0, 0.0};
  std::optional<double> dq;  ///< empty means "match"
  ScheduleSpec guided;

  // tdh / mctdh
  std::vector<ModeSpec> modes;
  CouplingSpec coupling;
  SpawnSpec spawn;

  // adiabatic
  ModelSpec model;
  int surface = 0;
  GaussianSpec initial;

  std::string echo;  ///< the parsed config re-serialized, for the summary
};

/// Parses and fully validates a config file; throws ConfigError carrying
/// every finding at once.
ScenarioConfig validate_config(const std::string& path);
ScenarioConfig validate_config_text(const std::string& text, const std::string& origin);

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RunOutcome {
  int exit_code = 0;  ///< 0 pass, 1 invariant failure, 3 numerical failure
  bool pass = false;
  std::vector<CheckResult> checks;
  std::string summary_path;
};

/// Runs the scenario pipeline, writing the diagnostics artifacts and the
/// machine-readable summary into output_dir. Numerical failures still leave
/// partial artifacts plus a FAILED marker behind.
RunOutcome run_scenario(const ScenarioConfig& cfg, const std::string& output_dir);

/// Scenario kinds with one-line descriptions.
std::vector<std::string> list_scenarios();

}  // namespace vqd::scenario
