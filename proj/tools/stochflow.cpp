#include "stochflow/config.hpp"
#include "stochflow/error.hpp"
#include "stochflow/runner.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic flows of jump diffusions: simulation, inversion and SPDE experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int workers = 1;
  std::optional<std::uint64_t> seed_override;

  CLI::App* run = app.add_subcommand("run", "run the experiment described by a config file");
  run->add_option("config", config_path, "YAML config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config)");
  run->add_option("--workers", workers, "worker threads for path-parallel work")->check(CLI::PositiveNumber);
  run->add_option("--seed-override", seed_override, "replace the config seed");

  CLI::App* validate = app.add_subcommand("validate", "parse and validate a config file");
  validate->add_option("config", config_path, "YAML config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  stochflow::ExperimentConfig config;
  try {
    config = stochflow::load_config(config_path);
  } catch (const stochflow::Error& e) {
    std::cerr << "stochflow: " << e.what() << "\n";
    return kExitConfig;
  }

  if (*validate) {
    std::cout << "ok: " << config.kind << " (" << config.family.name << ", d=" << config.family.dim << ")\n";
    return 0;
  }

  if (seed_override) config.seed = *seed_override;
  if (!out_dir.empty()) config.output = out_dir;
  try {
    const auto files = stochflow::run_experiment(config, config.output, workers);
    for (const auto& f : files) std::cout << config.output << "/" << f << "\n";
  } catch (const stochflow::Error& e) {
    std::cerr << "stochflow: " << e.what() << "\n";
    return e.kind() == stochflow::ErrorKind::ConfigError ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "stochflow: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
