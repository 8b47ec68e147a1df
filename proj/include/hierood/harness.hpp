#pragma once

// Leave-one-class-out experiment runner.
//
// A scenario withholds one leaf, splits the remaining classes 60/20/20, trains
// one classifier per grid cell (variant, beta, seed, learning rate), scores
// the known test samples and every withheld sample with each detector, and
// records one ExperimentResult per (cell, detector).

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hierood/classifier.hpp"
#include "hierood/dataset.hpp"
#include "hierood/ood_scores.hpp"
#include "hierood/taxonomy.hpp"

#include "json.hpp"

namespace hierood {

struct TrainingOptions {
  std::vector<std::size_t> hidden{64, 32};
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  double weight_decay = 1e-4;
  double momentum = 0.9;
};

struct ScenarioSpec {
  std::string left_out;
  std::vector<Method> detectors{Method::msp, Method::odin, Method::dmd};
  std::vector<Variant> variants{Variant::flat, Variant::hier};
  std::vector<double> betas{10.0};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<double> learning_rates{0.003, 0.01, 0.03};
  double temperature = 1000.0;
  double epsilon = 0.0012;
  double alpha = 0.05;

  // Throws ConfigError on empty sets or an unknown leaf.
  void validate(const TaxonomyTree& tree) const;
};

struct ExperimentConfig {
  std::optional<std::string> taxonomy_path;  // built-in steel taxonomy when empty
  std::optional<std::string> data_path;      // CSV; synthetic data when empty
  std::optional<GeneratorSpec> generator;    // defaults derived from the taxonomy
  std::vector<std::string> scenarios{"A12", "A31", "A61", "A40"};
  ScenarioSpec grid;  // left_out is filled per scenario
  TrainingOptions training;
  std::array<double, 3> split{0.6, 0.2, 0.2};
  FitLabels dmd_labels = FitLabels::truth;
  std::uint64_t master_seed = 0;
  std::string output_dir = "results";
  std::size_t threads = 1;
  bool diagnostics = true;
};

// Reads the JSON config. Relative paths resolve against the config file's
// directory. HIEROOD_SEED in the environment overrides the master seed.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& config);

struct ExperimentContext {
  TaxonomyTree tree;
  LabeledDataset data;
};

ExperimentContext prepare_context(const ExperimentConfig& config);

// One trained classifier of a scenario.
struct CellKey {
  std::string scenario;
  Variant variant = Variant::flat;
  double beta = 0.0;  // 0 for flat cells
  std::uint64_t seed = 0;
  double learning_rate = 0.0;

  std::string id() const;  // file-name friendly, unique per cell
  bool operator==(const CellKey&) const = default;
};

struct ExperimentResult {
  std::string scenario;
  Method method = Method::msp;
  Variant variant = Variant::flat;
  double beta = 0.0;
  std::uint64_t seed = 0;
  double learning_rate = 0.0;
  double auroc = 0.0;
  double threshold = 0.0;
  std::string score_dump;  // relative to the output directory
  long long wall_ms = 0;

  CellKey cell() const { return {scenario, variant, beta, seed, learning_rate}; }
};

// Sort key order: scenario, method, variant, beta, seed, lr.
bool result_less(const ExperimentResult& a, const ExperimentResult& b);
bool same_result_key(const ExperimentResult& a, const ExperimentResult& b);

struct CellFailure {
  CellKey cell;
  std::string kind;
  std::string message;
};

struct ScenarioRun {
  std::vector<ExperimentResult> results;
  std::vector<CellFailure> failures;
};

// Leave-out split plus the stratified split of the known classes, seeded
// from the scenario name.
struct ScenarioData {
  LeaveOutSplit leave_out;
  DataSplit split;
};
ScenarioData prepare_scenario(const ExperimentContext& context, const std::string& left_out,
                              const ExperimentConfig& config);

// Trains the classifier of one cell. Flat and hierarchical cells with the same
// (scenario, seed, lr) share initialization and batch order.
TrainResult train_cell(const ScenarioData& data, const CellKey& cell, const ExperimentConfig& config);

// Soft-label matrix a cell scores with: one-hot for flat cells.
SoftLabelMatrix cell_soft_labels(const TaxonomyTree& known_tree, const CellKey& cell);

// Gaussian bank over penultimate features of the training partition.
GaussianBank fit_bank(const ClassifierModel& model, const LabeledDataset& train_ds, FitLabels labels);

// One anomaly score per row of `ds`. `bank` is required for DMD only.
std::vector<double> score_dataset(const ClassifierModel& model, const LabeledDataset& ds, Method method,
                                  Variant variant, const SoftLabelMatrix& soft, const OdinParams& odin,
                                  const GaussianBank* bank);

// Deterministic seed for a named stream: mixes the master seed with a hash of
// the key, independent of scheduling.
std::uint64_t derive_seed(std::uint64_t master_seed, const std::string& key);

// Writes results.csv (incrementally, atomically replaced after every cell),
// score dumps under scores/ and diagnostics under diagnostics/ of
// config.output_dir. Cells whose rows already exist in results.csv are
// skipped.
ScenarioRun run_scenario(const ExperimentContext& context, const ScenarioSpec& spec,
                         const ExperimentConfig& config);

// run_scenario with the hierarchical beta grid replaced by `grid`.
ScenarioRun sweep_beta(const ExperimentContext& context, const ScenarioSpec& spec,
                       const std::vector<double>& grid, const ExperimentConfig& config);

// Every configured scenario, in order.
ScenarioRun run_experiment(const ExperimentContext& context, const ExperimentConfig& config);

inline constexpr const char* kResultsHeader = "scenario,method,variant,beta,seed,lr,auroc,threshold,wall_ms";

void write_results_csv(const std::string& path, std::vector<ExperimentResult> results);
std::vector<ExperimentResult> read_results_csv(const std::string& path);

// Median AUROC over result rows matching the filter (NaN when none match).
double median_auroc(const std::vector<ExperimentResult>& results, Method method, Variant variant,
                    std::optional<double> beta = std::nullopt);

}  // namespace hierood
