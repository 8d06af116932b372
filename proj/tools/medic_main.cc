// medic: generate synthetic data, run leave-one-domain-out experiments and
// dump gradient-matching diagnostics.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "medic/errors.h"
#include "medic/experiment.h"

namespace {

medic::ExperimentConfig load(const std::string& path, const std::string& out,
                             std::size_t workers) {
  medic::ExperimentConfig config = medic::load_experiment_config(path);
  if (!out.empty()) config.output_dir = out;
  if (workers > 0) config.workers = workers;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-set domain generalization lab (dualistic meta-learning)"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::size_t workers = 0;
  std::string checkpoint;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "Output directory (overrides output_dir)");
  };

  CLI::App* generate = app.add_subcommand("generate", "Write the synthetic dataset as CSV");
  add_common(generate);

  CLI::App* run = app.add_subcommand("run", "Train and evaluate every (target, seed) cell");
  add_common(run);
  run->add_option("--workers", workers, "Parallel cells (overrides workers)")
      ->check(CLI::PositiveNumber);

  CLI::App* diag = app.add_subcommand("diag", "Gradient-matching and Taylor diagnostics");
  add_common(diag);
  diag->add_option("--checkpoint", checkpoint, "Checkpoint written by 'run'")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const medic::ExperimentConfig config = load(config_path, out_dir, workers);
    if (generate->parsed()) {
      medic::cmd_generate(config, std::cout);
      return EXIT_SUCCESS;
    }
    if (run->parsed()) {
      const medic::RunSummary summary = medic::cmd_run(config, std::cout);
      return summary.exit_code();
    }
    if (diag->parsed()) {
      medic::cmd_diag(config, checkpoint, std::cout);
      return EXIT_SUCCESS;
    }
  } catch (const std::exception& e) {
    std::cerr << "medic: " << e.what() << "\n";
    return EXIT_FAILURE;
  }
  return EXIT_FAILURE;
}
