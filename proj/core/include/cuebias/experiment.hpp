#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "cuebias/dataset.hpp"
#include "cuebias/mlp.hpp"

namespace cuebias {

inline constexpr int kDefaultRuns = 5;
inline constexpr std::array<int, 4> kGridDepths{1, 2, 3, 10};
inline constexpr std::array<int, 3> kGridWidths{10, 100, 500};

// `depth` hidden layers of `width` units each.
NetworkConfig mlp_config(int depth, int width);

// Run seeds fanned out from one master seed.
std::vector<std::uint64_t> run_seeds(std::uint64_t master, int runs = kDefaultRuns);

struct Scenario {
  DatasetKind train_kind = DatasetKind::BothCues;
  NetworkConfig net;
  TrainConfig train;  // train.seed is ignored; each run derives its own
  std::vector<std::uint64_t> seeds;

  int depth() const { return static_cast<int>(net.hidden_layers.size()); }
  int width() const { return net.hidden_layers.empty() ? 0 : net.hidden_layers.front(); }
  // "<kind>_d<depth>_w<width>"
  std::string id() const;
  // Non-empty distinct seeds, at least one hidden layer, equal widths.
  void validate() const;
};

// Seeds for one run of one scenario. Datasets depend only on the run seed
// (or on the first run seed when the data is fixed), so every scenario of a
// run trains and tests on the same splits.
struct RunSeeds {
  std::uint64_t dataset = 0;
  std::uint64_t split = 0;
  std::uint64_t train = 0;
};
RunSeeds derive_run_seeds(const Scenario& scenario, std::size_t run, bool fixed_data);

struct PreparedDataset {
  std::shared_ptr<const SplitDataset> data;
  LabeledSet train;
  LabeledSet test;
};

// Generates split datasets on first use and caches them on disk and in
// memory. Safe to call from several threads.
class DatasetProvider {
 public:
  DatasetProvider(std::filesystem::path dir, GeneratorConfig config = {});

  std::shared_ptr<const PreparedDataset> get(DatasetKind kind, std::uint64_t dataset_seed,
                                             std::uint64_t split_seed);
  std::filesystem::path stem(DatasetKind kind, std::uint64_t dataset_seed,
                             std::uint64_t split_seed) const;
  const GeneratorConfig& config() const noexcept { return config_; }

 private:
  struct Entry {
    std::mutex mutex;
    std::shared_ptr<const PreparedDataset> value;
  };
  using Key = std::tuple<DatasetKind, std::uint64_t, std::uint64_t>;

  std::filesystem::path dir_;
  GeneratorConfig config_;
  std::mutex mutex_;
  std::map<Key, std::shared_ptr<Entry>> entries_;
};

struct RunRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure;
  int epochs = 0;
  double wall_seconds = 0.0;
  std::array<double, 4> accuracy{};  // percent, indexed by test DatasetKind
  std::filesystem::path model_path;
  std::filesystem::path epoch_log_path;
};

struct ScenarioResult {
  Scenario scenario;
  std::vector<RunRecord> runs;  // in seed order

  std::vector<const RunRecord*> successful() const;
};

struct ExperimentOptions {
  std::filesystem::path root;  // holds data/ and results/
  GeneratorConfig generator;
  bool fixed_data = false;
  int jobs = 1;
  std::function<void(const std::string&)> log;
};

// Thrown when a results directory was produced with different settings.
class StoreMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Results store layout, one directory per scenario:
//   results/<id>/scenario.json
//   results/<id>/run<r>.csv         train_kind,depth,width,seed,test_kind,accuracy,epochs,wall_time
//   results/<id>/run<r>.model
//   results/<id>/run<r>.epochs.csv
//   results/<id>/run<r>.failed      diverged runs
// run<r>.csv is written last, so its presence marks a finished run.
class ExperimentRunner {
 public:
  explicit ExperimentRunner(ExperimentOptions options);

  ScenarioResult run_scenario(const Scenario& scenario);
  // Runs every (scenario, seed) unit on `jobs` threads. A scenario whose
  // units throw is reported in `errors` and left out of the results.
  struct Batch {
    std::vector<ScenarioResult> results;
    std::vector<std::string> errors;
  };
  Batch run(std::span<const Scenario> scenarios);

  std::filesystem::path scenario_dir(const Scenario& scenario) const;
  DatasetProvider& datasets() noexcept { return datasets_; }
  const ExperimentOptions& options() const noexcept { return options_; }

  // Number of runs actually trained (not loaded from the store).
  std::size_t trained_runs() const noexcept { return trained_.load(); }

 private:
  void prepare(const Scenario& scenario);
  RunRecord run_unit(const Scenario& scenario, std::size_t run);
  void log(const std::string& line);

  ExperimentOptions options_;
  DatasetProvider datasets_;
  std::mutex log_mutex_;
  std::atomic<std::size_t> trained_{0};
};

// All train kinds x the given architectures.
std::vector<Scenario> grid_scenarios(std::span<const int> depths, std::span<const int> widths,
                                     const std::vector<std::uint64_t>& seeds,
                                     const TrainConfig& train = {},
                                     std::span<const DatasetKind> kinds = kAllDatasetKinds);

ExperimentRunner::Batch grid_sweep(ExperimentRunner& runner, std::span<const int> depths,
                                   std::span<const int> widths,
                                   const std::vector<std::uint64_t>& seeds,
                                   const TrainConfig& train = {});

// Reads every scenario under <root>/results without training. Unfinished
// runs are left out. Sorted by depth, width, then train kind.
std::vector<ScenarioResult> load_results(const std::filesystem::path& root);

void write_run_record(const std::filesystem::path& path, const Scenario& scenario,
                      const RunRecord& record);
RunRecord read_run_record(const std::filesystem::path& path);

// ---- aggregation ----

struct CellStats {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> sem;  // absent when n < 2
  double min = 0.0;
  double max = 0.0;
};

// Mean and standard error of the mean (n-1 standard deviation / sqrt(n)).
CellStats aggregate(std::span<const double> values);

// Per-seed accuracies for one architecture: rows are train kinds.
struct AccuracyMatrix {
  std::vector<DatasetKind> train_kinds;
  std::vector<std::array<std::vector<double>, 4>> cells;
};

struct AggregateStats {
  std::vector<DatasetKind> train_kinds;
  std::vector<std::array<CellStats, 4>> cells;

  const std::array<CellStats, 4>* row(DatasetKind train_kind) const;
};

AccuracyMatrix accuracy_matrix(std::span<const ScenarioResult> results, int depth, int width);
AggregateStats aggregate(const AccuracyMatrix& matrix);

// Epoch counts of the successful runs.
std::vector<double> epoch_counts(const ScenarioResult& result);

enum class PerformanceSymbol : std::uint8_t { Check, Circle, Cross };
// > 90 Check, < 40 Cross, Circle otherwise.
PerformanceSymbol symbolize(double mean_accuracy);
std::string_view glyph(PerformanceSymbol s) noexcept;
std::string_view to_string(PerformanceSymbol s) noexcept;

}  // namespace cuebias
