#ifndef MEDIC_EXPERIMENT_H_
#define MEDIC_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "medic/data.h"
#include "medic/eval.h"
#include "medic/model.h"
#include "medic/training.h"

namespace medic {

struct DiagConfig {
  std::size_t num_quads = 8;
  std::vector<double> alphas{1e-2, 5e-3, 2.5e-3};
  std::optional<int> target;  // defaults to the first configured target
};

// One experiment, parsed from a single JSON document. See docs/config.md for
// the schema.
struct ExperimentConfig {
  std::optional<SyntheticConfig> synthetic;
  std::optional<std::filesystem::path> csv_path;
  double csv_validation_fraction = kDefaultValidationFraction;

  std::size_t num_known = 0;
  std::vector<std::size_t> hidden_dims{32, 32};
  bool share_params = false;
  TrainConfig train;
  std::vector<ScoreMode> eval_modes{ScoreMode::kCls, ScoreMode::kBcls};
  std::size_t grid_size = 101;
  std::vector<std::uint64_t> seeds{0};
  std::optional<std::vector<int>> targets;  // nullopt: every domain in turn
  std::filesystem::path output_dir = "medic_out";
  std::size_t workers = 1;
  DiagConfig diag;
};

// Parses and validates; unknown keys and wrong types raise ConfigError.
// Relative csv paths resolve against base_dir.
ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Canonical JSON echo of a parsed config (sorted keys).
std::string config_to_json(const ExperimentConfig& config);

MultiDomainDataset load_dataset(const ExperimentConfig& config);

// Targets to evaluate: the configured list, or every domain of the dataset.
std::vector<int> resolve_targets(const ExperimentConfig& config,
                                 const MultiDomainDataset& dataset);

// Seed for one (seed, target) cell and RNG stream. Independent of which
// other targets are configured.
std::uint64_t derive_run_seed(std::uint64_t seed, int target, std::uint64_t stream);

// Writes <out>/dataset.csv and logs counts.
std::filesystem::path cmd_generate(const ExperimentConfig& config, std::ostream& log);

struct ModeMetrics {
  double acc = 0.0;
  double h_best = 0.0;
  double mu_best = 0.0;
  double oscr = 0.0;
};

struct RunSummary {
  std::filesystem::path manifest;
  std::size_t cells = 0;
  std::size_t failed = 0;
  int exit_code() const { return cells > 0 && failed == 0 ? 0 : 1; }
};

// Trains and evaluates every (target, seed) cell, writes per-cell files and
// <out>/manifest.json. A failing cell is recorded in the manifest and does
// not stop the others.
RunSummary cmd_run(const ExperimentConfig& config, std::ostream& log);

struct DiagOutputs {
  std::filesystem::path gradients_csv;
  std::filesystem::path taylor_csv;
};

// Gradient-matching diagnostics over diag.num_quads fresh quads and the
// Taylor residual over diag.alphas, for a saved checkpoint.
DiagOutputs cmd_diag(const ExperimentConfig& config,
                     const std::filesystem::path& checkpoint, std::ostream& log);

// Serialisations shared by cmd_run and the tests.
std::string report_to_json(const EvalReport& report, int target, std::uint64_t seed);

}  // namespace medic

#endif  // MEDIC_EXPERIMENT_H_
