#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "destiny/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"destiny: decentralized optimization over the Stiefel manifold"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;

  auto* run_cmd = app.add_subcommand("run", "run an experiment from a config");
  run_cmd->add_option("config", config_path, "path to key = value config")
      ->required();
  run_cmd->add_option("--seed", seed_override, "override the config seed");

  auto* verify_cmd = app.add_subcommand(
      "verify", "check the mixing matrix implied by a config");
  verify_cmd->add_option("config", config_path, "path to key = value config")
      ->required();
  verify_cmd->add_option("--seed", seed_override, "override the config seed");

  CLI11_PARSE(app, argc, argv);

  destiny::ExperimentConfig cfg;
  try {
    cfg = destiny::parse_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  if (seed_override) cfg.seed = *seed_override;

  if (run_cmd->parsed()) return destiny::run_experiment(cfg);
  return destiny::verify_experiment(cfg);
}
