#include "cuebias/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "cuebias/checksum.hpp"
#include "cuebias/errors.hpp"
#include "cuebias/fileio.hpp"

namespace cuebias {

namespace {

std::string format_double(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string run_name(std::size_t run) { return "run" + std::to_string(run); }

std::string scenario_document(const Scenario& s, const ExperimentOptions& o) {
  nlohmann::ordered_json j;
  j["id"] = s.id();
  j["train_kind"] = std::string(to_string(s.train_kind));
  j["hidden_layers"] = s.net.hidden_layers;
  j["batch_size"] = s.train.batch_size;
  j["learning_rate"] = s.train.learning_rate;
  j["max_epochs"] = s.train.max_epochs;
  j["patience"] = s.train.patience;
  j["min_delta"] = s.train.min_delta;
  auto seeds = nlohmann::ordered_json::array();
  for (const auto seed : s.seeds) seeds.push_back(to_hex(seed));
  j["seeds"] = seeds;
  j["fixed_data"] = o.fixed_data;
  j["generator"] = {{"samples_per_class", o.generator.samples_per_class},
                    {"distortion_rate", o.generator.distortion_rate},
                    {"train_fraction", o.generator.train_fraction},
                    {"pattern_pixels", o.generator.pattern_pixels},
                    {"sigma", o.generator.sigma}};
  return j.dump(2) + "\n";
}

void write_failure(const std::filesystem::path& path, std::uint64_t seed, int epoch,
                   const std::string& reason) {
  std::string text = "seed=" + std::to_string(seed) + "\nepoch=" + std::to_string(epoch) +
                     "\nreason=" + reason + "\n";
  write_file_atomically(path, text);
}

RunRecord read_failure(const std::filesystem::path& path) {
  RunRecord r;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "seed") r.seed = std::stoull(value);
    if (key == "epoch") r.epochs = std::stoi(value);
    if (key == "reason") r.failure = value;
  }
  if (r.failure.empty()) r.failure = "unknown failure";
  return r;
}

}  // namespace

NetworkConfig mlp_config(int depth, int width) {
  if (depth < 1) throw std::invalid_argument("depth must be >= 1");
  if (width < 1) throw std::invalid_argument("width must be >= 1");
  NetworkConfig c;
  c.hidden_layers.assign(static_cast<std::size_t>(depth), width);
  return c;
}

std::vector<std::uint64_t> run_seeds(std::uint64_t master, int runs) {
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  std::vector<std::uint64_t> out;
  for (int r = 0; r < runs; ++r) out.push_back(derive_seed(master, "run", static_cast<std::uint64_t>(r)));
  return out;
}

std::string Scenario::id() const {
  return std::string(to_string(train_kind)) + "_d" + std::to_string(depth()) + "_w" +
         std::to_string(width());
}

void Scenario::validate() const {
  if (seeds.empty()) throw std::invalid_argument("scenario needs at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw std::invalid_argument("scenario seeds must be distinct");
  }
  net.validate();
  if (net.input_dim != kImageCells || net.output_dim != kNumClasses) {
    throw std::invalid_argument("scenario network must map 900 inputs to 3 classes");
  }
  if (net.hidden_layers.empty()) throw std::invalid_argument("scenario needs a hidden layer");
  for (const int w : net.hidden_layers) {
    if (w != net.hidden_layers.front()) {
      throw std::invalid_argument("scenario hidden layers must share one width");
    }
  }
  train.validate();
}

RunSeeds derive_run_seeds(const Scenario& scenario, std::size_t run, bool fixed_data) {
  if (run >= scenario.seeds.size()) throw std::out_of_range("run index out of range");
  const std::uint64_t data_base = fixed_data ? scenario.seeds.front() : scenario.seeds[run];
  return {derive_seed(data_base, "data"), derive_seed(data_base, "split"),
          derive_seed(scenario.seeds[run], "train/" + scenario.id())};
}

DatasetProvider::DatasetProvider(std::filesystem::path dir, GeneratorConfig config)
    : dir_(std::move(dir)), config_(config) {}

std::filesystem::path DatasetProvider::stem(DatasetKind kind, std::uint64_t dataset_seed,
                                            std::uint64_t split_seed) const {
  return dir_ / (std::string(to_string(kind)) + "_" + to_hex(dataset_seed) + "_" + to_hex(split_seed));
}

std::shared_ptr<const PreparedDataset> DatasetProvider::get(DatasetKind kind,
                                                            std::uint64_t dataset_seed,
                                                            std::uint64_t split_seed) {
  std::shared_ptr<Entry> entry;
  {
    std::lock_guard lock(mutex_);
    auto& slot = entries_[Key{kind, dataset_seed, split_seed}];
    if (!slot) slot = std::make_shared<Entry>();
    entry = slot;
  }
  std::lock_guard lock(entry->mutex);
  if (entry->value) return entry->value;

  const auto path = stem(kind, dataset_seed, split_seed);
  std::shared_ptr<SplitDataset> data;
  if (std::filesystem::exists(manifest_path(path)) && std::filesystem::exists(payload_path(path))) {
    const SplitManifest m = read_manifest(path);
    if (m.samples != static_cast<std::size_t>(config_.total_samples()) ||
        m.pattern_pixels != config_.pattern_pixels || m.sigma != config_.sigma) {
      throw FormatError("cached dataset " + path.string() +
                        " was generated with different settings");
    }
    data = std::make_shared<SplitDataset>(load_dataset(path));
  } else {
    data = std::make_shared<SplitDataset>(
        split(build_dataset(kind, dataset_seed, config_), split_seed));
    save_dataset(*data, path);
  }
  auto prepared = std::make_shared<PreparedDataset>();
  prepared->train = LabeledSet::from_records(data->train);
  prepared->test = LabeledSet::from_records(data->test);
  prepared->data = std::move(data);
  entry->value = std::move(prepared);
  return entry->value;
}

std::vector<const RunRecord*> ScenarioResult::successful() const {
  std::vector<const RunRecord*> out;
  for (const auto& r : runs) {
    if (r.ok) out.push_back(&r);
  }
  return out;
}

ExperimentRunner::ExperimentRunner(ExperimentOptions options)
    : options_(std::move(options)), datasets_(options_.root / "data", options_.generator) {
  if (options_.jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

std::filesystem::path ExperimentRunner::scenario_dir(const Scenario& scenario) const {
  return options_.root / "results" / scenario.id();
}

void ExperimentRunner::log(const std::string& line) {
  if (!options_.log) return;
  std::lock_guard lock(log_mutex_);
  options_.log(line);
}

void ExperimentRunner::prepare(const Scenario& scenario) {
  scenario.validate();
  const auto dir = scenario_dir(scenario);
  const auto doc_path = dir / "scenario.json";
  const std::string doc = scenario_document(scenario, options_);
  if (std::filesystem::exists(doc_path)) {
    if (read_text_file(doc_path) != doc) {
      throw StoreMismatch("results in " + dir.string() +
                          " were produced with different settings; use another results root");
    }
    return;
  }
  write_file_atomically(doc_path, doc);
}

RunRecord ExperimentRunner::run_unit(const Scenario& scenario, std::size_t run) {
  const auto dir = scenario_dir(scenario);
  const auto record_path = dir / (run_name(run) + ".csv");
  const auto failure_path = dir / (run_name(run) + ".failed");
  const auto model_path = dir / (run_name(run) + ".model");
  const auto log_path = dir / (run_name(run) + ".epochs.csv");
  const std::uint64_t seed = scenario.seeds[run];

  auto finish = [&](RunRecord r) {
    if (r.seed != seed) {
      throw StoreMismatch("stored " + run_name(run) + " of " + scenario.id() +
                          " belongs to another seed");
    }
    r.run = run;
    if (r.ok) {
      r.model_path = model_path;
      r.epoch_log_path = log_path;
    }
    return r;
  };
  if (std::filesystem::exists(record_path)) return finish(read_run_record(record_path));
  if (std::filesystem::exists(failure_path)) return finish(read_failure(failure_path));

  const RunSeeds seeds = derive_run_seeds(scenario, run, options_.fixed_data);
  std::array<std::shared_ptr<const PreparedDataset>, 4> data;
  for (const auto k : kAllDatasetKinds) {
    data[static_cast<std::size_t>(k)] = datasets_.get(k, seeds.dataset, seeds.split);
  }

  TrainConfig config = scenario.train;
  config.seed = seeds.train;
  log("train " + scenario.id() + " " + run_name(run));
  TrainResult trained;
  try {
    trained = train(data[static_cast<std::size_t>(scenario.train_kind)]->train, scenario.net, config);
  } catch (const TrainingDiverged& e) {
    write_failure(failure_path, seed, e.epoch(), e.what());
    ++trained_;
    log("failed " + scenario.id() + " " + run_name(run) + ": " + e.what());
    RunRecord r;
    r.seed = seed;
    r.epochs = e.epoch();
    r.failure = e.what();
    return finish(std::move(r));
  }

  RunRecord r;
  r.seed = seed;
  r.ok = true;
  r.epochs = trained.report.epochs_run;
  r.wall_seconds = trained.report.wall_seconds;
  for (const auto k : kAllDatasetKinds) {
    const auto i = static_cast<std::size_t>(k);
    r.accuracy[i] = 100.0 * evaluate(trained.params, data[i]->test).accuracy();
  }
  save_model(trained.params, model_path);
  write_train_log(trained.report, log_path);
  write_run_record(record_path, scenario, r);
  ++trained_;
  log("done " + scenario.id() + " " + run_name(run) + ": " + std::to_string(r.epochs) +
      " epochs, own test " +
      format_double(r.accuracy[static_cast<std::size_t>(scenario.train_kind)], "%.2f") + "%");
  return finish(std::move(r));
}

ExperimentRunner::Batch ExperimentRunner::run(std::span<const Scenario> scenarios) {
  Batch batch;
  std::vector<std::optional<std::string>> errors(scenarios.size());
  std::vector<std::vector<RunRecord>> records(scenarios.size());
  struct Unit {
    std::size_t scenario;
    std::size_t run;
  };
  std::vector<Unit> units;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    try {
      prepare(scenarios[s]);
    } catch (const std::exception& e) {
      errors[s] = e.what();
      continue;
    }
    records[s].resize(scenarios[s].seeds.size());
    for (std::size_t r = 0; r < scenarios[s].seeds.size(); ++r) units.push_back({s, r});
  }

  std::mutex error_mutex;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) {
      const auto [s, r] = units[i];
      {
        std::lock_guard lock(error_mutex);
        if (errors[s]) continue;
      }
      try {
        records[s][r] = run_unit(scenarios[s], r);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (!errors[s]) errors[s] = e.what();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(options_.jobs), units.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    if (errors[s]) {
      batch.errors.push_back(scenarios[s].id() + ": " + *errors[s]);
      continue;
    }
    batch.results.push_back({scenarios[s], std::move(records[s])});
  }
  return batch;
}

ScenarioResult ExperimentRunner::run_scenario(const Scenario& scenario) {
  auto batch = run(std::span<const Scenario>(&scenario, 1));
  if (!batch.errors.empty()) throw std::runtime_error(batch.errors.front());
  return std::move(batch.results.front());
}

std::vector<Scenario> grid_scenarios(std::span<const int> depths, std::span<const int> widths,
                                     const std::vector<std::uint64_t>& seeds,
                                     const TrainConfig& train, std::span<const DatasetKind> kinds) {
  std::vector<Scenario> out;
  for (const int d : depths) {
    for (const int w : widths) {
      for (const auto k : kinds) out.push_back({k, mlp_config(d, w), train, seeds});
    }
  }
  return out;
}

ExperimentRunner::Batch grid_sweep(ExperimentRunner& runner, std::span<const int> depths,
                                   std::span<const int> widths,
                                   const std::vector<std::uint64_t>& seeds,
                                   const TrainConfig& train) {
  const auto scenarios = grid_scenarios(depths, widths, seeds, train);
  return runner.run(scenarios);
}

std::vector<ScenarioResult> load_results(const std::filesystem::path& root) {
  std::vector<ScenarioResult> out;
  const auto results = root / "results";
  if (!std::filesystem::is_directory(results)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(results)) {
    const auto doc_path = entry.path() / "scenario.json";
    if (!entry.is_directory() || !std::filesystem::exists(doc_path)) continue;
    ScenarioResult res;
    try {
      const auto j = nlohmann::json::parse(read_text_file(doc_path));
      const auto kind = parse_dataset_kind(j.at("train_kind").get<std::string>());
      if (!kind) throw FormatError("unknown train kind");
      res.scenario.train_kind = *kind;
      res.scenario.net.hidden_layers = j.at("hidden_layers").get<std::vector<int>>();
      res.scenario.train.batch_size = j.at("batch_size").get<int>();
      res.scenario.train.learning_rate = j.at("learning_rate").get<double>();
      res.scenario.train.max_epochs = j.at("max_epochs").get<int>();
      res.scenario.train.patience = j.at("patience").get<int>();
      res.scenario.train.min_delta = j.at("min_delta").get<double>();
      for (const auto& seed : j.at("seeds")) res.scenario.seeds.push_back(from_hex(seed.get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("bad scenario document " + doc_path.string() + ": " + e.what());
    }
    for (std::size_t r = 0; r < res.scenario.seeds.size(); ++r) {
      const auto base = entry.path() / run_name(r);
      RunRecord rec;
      auto record = base;
      record += ".csv";
      auto failed = base;
      failed += ".failed";
      if (std::filesystem::exists(record)) {
        rec = read_run_record(record);
        rec.model_path = base;
        rec.model_path += ".model";
        rec.epoch_log_path = base;
        rec.epoch_log_path += ".epochs.csv";
      } else if (std::filesystem::exists(failed)) {
        rec = read_failure(failed);
      } else {
        continue;
      }
      rec.run = r;
      res.runs.push_back(std::move(rec));
    }
    out.push_back(std::move(res));
  }
  std::sort(out.begin(), out.end(), [](const ScenarioResult& a, const ScenarioResult& b) {
    return std::tuple(a.scenario.depth(), a.scenario.width(), a.scenario.train_kind) <
           std::tuple(b.scenario.depth(), b.scenario.width(), b.scenario.train_kind);
  });
  return out;
}

void write_run_record(const std::filesystem::path& path, const Scenario& scenario,
                      const RunRecord& record) {
  std::string text = "train_kind,depth,width,seed,test_kind,accuracy,epochs,wall_time\n";
  for (const auto k : kAllDatasetKinds) {
    text += std::string(to_string(scenario.train_kind)) + "," + std::to_string(scenario.depth()) +
            "," + std::to_string(scenario.width()) + "," + std::to_string(record.seed) + "," +
            std::string(to_string(k)) + "," +
            format_double(record.accuracy[static_cast<std::size_t>(k)]) + "," +
            std::to_string(record.epochs) + "," + format_double(record.wall_seconds, "%.3f") + "\n";
  }
  write_file_atomically(path, text);
}

RunRecord read_run_record(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) ||
      line != "train_kind,depth,width,seed,test_kind,accuracy,epochs,wall_time") {
    throw FormatError("bad run record header in " + path.string());
  }
  RunRecord r;
  r.ok = true;
  std::array<bool, 4> seen{};
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 8) throw FormatError("bad run record line in " + path.string());
    const auto test = parse_dataset_kind(f[4]);
    if (!test) throw FormatError("unknown test kind in " + path.string());
    try {
      r.seed = std::stoull(f[3]);
      r.accuracy[static_cast<std::size_t>(*test)] = std::stod(f[5]);
      r.epochs = std::stoi(f[6]);
      r.wall_seconds = std::stod(f[7]);
    } catch (const std::exception&) {
      throw FormatError("bad number in " + path.string());
    }
    seen[static_cast<std::size_t>(*test)] = true;
  }
  if (std::count(seen.begin(), seen.end(), true) != 4) {
    throw FormatError("incomplete run record " + path.string());
  }
  return r;
}

CellStats aggregate(std::span<const double> values) {
  CellStats s;
  s.n = values.size();
  if (values.empty()) {
    s.mean = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (const double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  if (s.n >= 2) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.sem = sd / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

const std::array<CellStats, 4>* AggregateStats::row(DatasetKind train_kind) const {
  for (std::size_t i = 0; i < train_kinds.size(); ++i) {
    if (train_kinds[i] == train_kind) return &cells[i];
  }
  return nullptr;
}

AccuracyMatrix accuracy_matrix(std::span<const ScenarioResult> results, int depth, int width) {
  AccuracyMatrix m;
  for (const auto k : kAllDatasetKinds) {
    for (const auto& res : results) {
      if (res.scenario.train_kind != k || res.scenario.depth() != depth ||
          res.scenario.width() != width) {
        continue;
      }
      std::array<std::vector<double>, 4> row;
      for (const auto* run : res.successful()) {
        for (std::size_t t = 0; t < 4; ++t) row[t].push_back(run->accuracy[t]);
      }
      m.train_kinds.push_back(k);
      m.cells.push_back(std::move(row));
      break;
    }
  }
  return m;
}

AggregateStats aggregate(const AccuracyMatrix& matrix) {
  AggregateStats out;
  out.train_kinds = matrix.train_kinds;
  for (const auto& row : matrix.cells) {
    std::array<CellStats, 4> stats;
    for (std::size_t t = 0; t < 4; ++t) stats[t] = aggregate(row[t]);
    out.cells.push_back(stats);
  }
  return out;
}

std::vector<double> epoch_counts(const ScenarioResult& result) {
  std::vector<double> out;
  for (const auto* run : result.successful()) out.push_back(run->epochs);
  return out;
}

PerformanceSymbol symbolize(double mean_accuracy) {
  if (mean_accuracy > 90.0) return PerformanceSymbol::Check;
  if (mean_accuracy < 40.0) return PerformanceSymbol::Cross;
  return PerformanceSymbol::Circle;
}

std::string_view glyph(PerformanceSymbol s) noexcept {
  switch (s) {
    case PerformanceSymbol::Check:
      return "✓";
    case PerformanceSymbol::Circle:
      return "○";
    case PerformanceSymbol::Cross:
      return "×";
  }
  return "?";
}

std::string_view to_string(PerformanceSymbol s) noexcept {
  switch (s) {
    case PerformanceSymbol::Check:
      return "check";
    case PerformanceSymbol::Circle:
      return "circle";
    case PerformanceSymbol::Cross:
      return "cross";
  }
  return "?";
}

}  // namespace cuebias
