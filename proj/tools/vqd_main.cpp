#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "vqd/scenario.hpp"

namespace {

int run_command(const std::string& config_path, const std::string& output_dir,
                std::optional<std::uint64_t> seed, std::optional<int> samples) {
  vqd::scenario::ScenarioConfig cfg = vqd::scenario::validate_config(config_path);
  if (seed) cfg.seed = *seed;
  if (samples) {
    if (*samples < 2) throw vqd::ConfigError("--samples must be at least 2");
    cfg.n_samples = *samples;
  }
  const vqd::scenario::RunOutcome outcome = vqd::scenario::run_scenario(cfg, output_dir);
  for (const auto& c : outcome.checks) {
    std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name
              << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
  }
  std::cout << (outcome.exit_code == 0 ? "PASS" : "FAIL") << "  summary: "
            << outcome.summary_path << "\n";
  return outcome.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variational quantum dynamics diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir = [] {
    const char* env = std::getenv("VQD_OUTPUT_DIR");
    return env ? std::string(env) : std::string("out");
  }();
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;

  CLI::App* run = app.add_subcommand("run", "run a scenario config and emit artifacts");
  run->add_option("config", config_path, "scenario JSON file")->required();
  run->add_option("--output-dir", output_dir, "artifact directory (default $VQD_OUTPUT_DIR or ./out)");
  run->add_option("--seed", seed, "override the config's random seed");
  run->add_option("--samples", samples, "override the config's n_samples");

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "validate a config without running");
  validate->add_option("config", validate_path, "scenario JSON file")->required();

  app.add_subcommand("list-scenarios", "print the available scenario kinds");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return run_command(config_path, output_dir, seed, samples);
    }
    if (validate->parsed()) {
      vqd::scenario::validate_config(validate_path);
      std::cout << "OK " << validate_path << "\n";
      return 0;
    }
    for (const auto& line : vqd::scenario::list_scenarios()) std::cout << line << "\n";
    return 0;
  } catch (const vqd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    for (const auto& d : e.details()) std::cerr << "  - " << d << "\n";
    return 2;
  } catch (const vqd::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
