#include "cuebias/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cuebias/checksum.hpp"
#include "cuebias/dataset.hpp"
#include "cuebias/errors.hpp"
#include "cuebias/experiment.hpp"
#include "cuebias/mlp.hpp"
#include "cuebias/report.hpp"

namespace cuebias::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Signals a failure whose message was already printed.
struct Exit {
  int code;
};

std::vector<std::string> kind_names() {
  std::vector<std::string> out;
  for (const auto k : kAllDatasetKinds) out.emplace_back(to_string(k));
  return out;
}

DatasetKind kind_of(const std::string& s) { return *parse_dataset_kind(s); }

struct Common {
  std::string root;
  bool json = false;
  bool quiet = false;

  fs::path root_path() const {
    if (!root.empty()) return root;
    if (const char* env = std::getenv(kRootEnv); env && *env) return env;
    return "cuebias-store";
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--root", c.root,
                  std::string("Store root for datasets, models and results (default: $") +
                      kRootEnv + " or ./cuebias-store)");
  app->add_flag("--json", c.json, "Print one machine-readable JSON document");
  app->add_flag("-q,--quiet", c.quiet, "No progress lines on stderr");
}

void add_training(CLI::App* app, TrainConfig& t) {
  app->add_option("--batch", t.batch_size, "Minibatch size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--lr", t.learning_rate, "SGD learning rate")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--max-epochs", t.max_epochs, "Epoch limit")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--patience", t.patience, "Early stopping: epochs without improvement")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--min-delta", t.min_delta,
                  "Early stopping: smallest loss decrease that counts as improvement")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
}

json stats_json(const CellStats& s) {
  json j;
  j["n"] = s.n;
  j["mean"] = s.n ? json(s.mean) : json(nullptr);
  j["sem"] = s.sem ? json(*s.sem) : json(nullptr);
  return j;
}

json manifest_json(const SplitManifest& m) { return json::parse(manifest_to_json(m)); }

// A dataset given either as a file stem or as a kind name; kind names are
// served from <root>/data.
std::shared_ptr<const PreparedDataset> resolve_data(const std::string& spec, std::uint64_t data_seed,
                                                    const fs::path& root, std::ostream& err) {
  if (fs::exists(manifest_path(spec))) {
    auto data = std::make_shared<SplitDataset>(load_dataset(spec));
    auto prepared = std::make_shared<PreparedDataset>();
    prepared->train = LabeledSet::from_records(data->train);
    prepared->test = LabeledSet::from_records(data->test);
    prepared->data = std::move(data);
    return prepared;
  }
  if (const auto kind = parse_dataset_kind(spec)) {
    DatasetProvider provider(root / "data");
    return provider.get(*kind, data_seed, derive_seed(data_seed, "split"));
  }
  err << "error: no dataset at '" << spec << "' (expected a file stem or one of: both-cues, "
      << "symbol, pattern, dist-both-cues)\n";
  throw Exit{kExitFailure};
}

// ---- gen ----

struct GenArgs {
  Common common;
  std::string kind;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> split_seed;
  int samples_per_class = GeneratorConfig{}.samples_per_class;
  std::string out;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  const auto kind = kind_of(a.kind);
  GeneratorConfig g;
  g.samples_per_class = a.samples_per_class;
  const std::uint64_t split_seed = a.split_seed.value_or(derive_seed(a.seed, "split"));
  const fs::path stem = a.out.empty()
                            ? a.common.root_path() / "data" /
                                  (a.kind + "_seed" + std::to_string(a.seed))
                            : fs::path(a.out);
  const Dataset full = build_dataset(kind, a.seed, g);
  const DatasetManifest whole = full.manifest();
  const SplitManifest m = save_dataset(split(full, split_seed), stem);

  if (a.common.json) {
    json j = manifest_json(m);
    json per_class = json::object();
    for (const ClassLabel l : kAllLabels) {
      per_class[std::string(to_string(l))] = whole.distorted_per_class[static_cast<std::size_t>(index_of(l))];
    }
    j["distorted_per_class"] = per_class;
    j["manifest_path"] = manifest_path(stem).string();
    j["payload_path"] = payload_path(stem).string();
    out << j.dump(2) << "\n";
    return 0;
  }
  out << "kind:       " << to_string(kind) << "\n"
      << "samples:    " << m.samples << " (" << m.class_counts[0] << " / " << m.class_counts[1]
      << " / " << m.class_counts[2] << " per class)\n"
      << "distorted:  " << m.distorted << " (" << whole.distorted_per_class[0] << " / "
      << whole.distorted_per_class[1] << " / " << whole.distorted_per_class[2] << " per class)\n"
      << "train/test: " << m.train_count << " / " << m.test_count << "\n"
      << "checksum:   " << to_hex(m.checksum) << "\n"
      << "files:      " << manifest_path(stem).string() << ", " << payload_path(stem).string()
      << "\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  Common common;
  std::string data;
  std::uint64_t data_seed = 0;
  int depth = 1;
  int width = 100;
  std::uint64_t seed = 0;
  TrainConfig train;
  std::string out;
};

int cmd_train(TrainArgs a, std::ostream& out, std::ostream& err) {
  const fs::path root = a.common.root_path();
  const auto data = resolve_data(a.data, a.data_seed, root, err);
  const NetworkConfig net = mlp_config(a.depth, a.width);
  a.train.seed = a.seed;
  const std::string name = to_string(data->data->kind).data();
  const fs::path model = a.out.empty() ? root / "models" /
                                             (name + "_d" + std::to_string(a.depth) + "_w" +
                                              std::to_string(a.width) + "_s" +
                                              std::to_string(a.seed) + ".model")
                                       : fs::path(a.out);
  fs::path log = model;
  log += ".epochs.csv";

  EpochCallback progress;
  if (!a.common.quiet) {
    progress = [&err](int epoch, double loss) {
      if (epoch % 50 == 0) err << "epoch " << epoch << " loss " << loss << "\n";
    };
  }
  TrainResult result;
  try {
    result = train(data->train, net, a.train, progress);
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << "\n";
    return kExitDiverged;
  }
  save_model(result.params, model);
  write_train_log(result.report, log);

  const auto& r = result.report;
  const double final_loss = r.epoch_loss.back();
  if (a.common.json) {
    json j;
    j["model"] = model.string();
    j["epoch_log"] = log.string();
    j["epochs"] = r.epochs_run;
    j["stop_reason"] = std::string(to_string(r.stop_reason));
    j["final_loss"] = final_loss;
    j["best_epoch"] = r.best_epoch;
    j["best_loss"] = r.best_loss;
    j["wall_seconds"] = r.wall_seconds;
    out << j.dump(2) << "\n";
    return 0;
  }
  out << "epochs:     " << r.epochs_run << " (" << to_string(r.stop_reason) << ")\n"
      << "final loss: " << final_loss << "\n"
      << "best loss:  " << r.best_loss << " at epoch " << r.best_epoch << " (kept)\n"
      << "model:      " << model.string() << "\n"
      << "epoch log:  " << log.string() << "\n";
  return 0;
}

// ---- eval ----

struct EvalArgs {
  Common common;
  std::string model;
  std::string data;
  std::uint64_t data_seed = 0;
  std::string split = "test";
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto params = load_model(a.model);
  const auto config = params.config();
  if (config.input_dim != kImageCells || config.output_dim != kNumClasses) {
    err << "error: model maps " << config.input_dim << " inputs to " << config.output_dim
        << " outputs; images need " << kImageCells << " -> " << kNumClasses << "\n";
    return kExitFailure;
  }
  const auto data = resolve_data(a.data, a.data_seed, a.common.root_path(), err);
  const auto& set = a.split == "train" ? data->train : data->test;
  const Evaluation ev = evaluate(params, set);
  const double pct = 100.0 * ev.accuracy();
  if (a.common.json) {
    json j;
    j["dataset"] = std::string(to_string(data->data->kind));
    j["split"] = a.split;
    j["accuracy"] = pct;
    j["correct"] = ev.correct;
    j["total"] = ev.total;
    j["confusion"] = ev.confusion;
    out << j.dump(2) << "\n";
    return 0;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", pct);
  out << "accuracy: " << buf << "% (" << ev.correct << " / " << ev.total << ", "
      << to_string(data->data->kind) << " " << a.split << ")\n"
      << "confusion (rows: true class, columns: predicted)\n";
  for (int t = 0; t < kNumClasses; ++t) {
    out << "  " << to_string(kAllLabels[t]) << ":";
    for (int p = 0; p < kNumClasses; ++p) out << " " << ev.confusion[t][p];
    out << "\n";
  }
  return 0;
}

// ---- reproduce / sweep / report ----

struct RunArgs {
  Common common;
  std::uint64_t seed = 0;
  int runs = kDefaultRuns;
  int jobs = 1;
  bool fixed_data = false;
  int samples_per_class = GeneratorConfig{}.samples_per_class;
  TrainConfig train;
  std::string report_dir;
  std::string format = "both";
};

void add_run_options(CLI::App* app, RunArgs& a) {
  add_common(app, a.common);
  app->add_option("--seed", a.seed, "Master seed")->capture_default_str();
  app->add_option("--runs", a.runs, "Seeds per scenario")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("-j,--jobs", a.jobs, "Training runs executed in parallel")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_flag("--fixed-data", a.fixed_data,
                "Share one dataset across all seeds; only initialization and shuffling vary");
  app->add_option("--samples-per-class", a.samples_per_class, "Images generated per class")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  add_training(app, a.train);
  app->add_option("--report-dir", a.report_dir, "Where report files go (default: <store>/reports)");
  app->add_option("--format", a.format, "Report format")
      ->capture_default_str()
      ->check(CLI::IsMember({"delimited", "plain-table", "both"}));
}

fs::path store_of(const Common& c, std::uint64_t master) {
  return c.root_path() / ("master-" + to_hex(master));
}

std::vector<fs::path> write_reports(std::span<const ScenarioResult> results, const fs::path& dir,
                                    const std::string& format) {
  std::vector<fs::path> files;
  for (const auto f : {ReportFormat::Delimited, ReportFormat::PlainTable}) {
    if (format != "both" && format != to_string(f)) continue;
    for (auto& p : emit_report(results, dir, f)) files.push_back(std::move(p));
  }
  return files;
}

// Every requested cell must have at least one successful run.
std::vector<std::string> missing_cells(std::span<const Scenario> wanted,
                                       std::span<const ScenarioResult> results) {
  std::vector<std::string> missing;
  for (const auto& s : wanted) {
    bool found = false;
    for (const auto& r : results) {
      if (r.scenario.id() == s.id()) found = !r.successful().empty();
    }
    if (!found) missing.push_back(s.id());
  }
  return missing;
}

int finish_runs(const RunArgs& a, const std::string& label, std::span<const Scenario> wanted,
                const ExperimentRunner::Batch& batch, std::ostream& out, std::ostream& err,
                const std::function<void(std::ostream&)>& print_tables) {
  for (const auto& e : batch.errors) err << "error: " << e << "\n";
  std::size_t failed_runs = 0;
  for (const auto& r : batch.results) {
    for (const auto& run : r.runs) {
      if (!run.ok) {
        ++failed_runs;
        err << "warning: " << r.scenario.id() << " run" << run.run << " failed: " << run.failure
            << "\n";
      }
    }
  }
  const auto missing = missing_cells(wanted, batch.results);
  std::vector<fs::path> files;
  if (!batch.results.empty()) {
    const fs::path dir = a.report_dir.empty() ? store_of(a.common, a.seed) / "reports" / label
                                              : fs::path(a.report_dir);
    files = write_reports(batch.results, dir, a.format);
  }
  if (a.common.json) {
    json j;
    j["scope"] = label;
    j["master_seed"] = a.seed;
    json cells = json::array();
    for (const auto& c : collect_cells(batch.results)) {
      json cj{{"train_kind", to_string(c.train_kind)},
              {"depth", c.depth},
              {"width", c.width},
              {"test_kind", to_string(c.test_kind)}};
      cj.update(stats_json(c.stats));
      if (c.stats.n) cj["symbol"] = std::string(to_string(symbolize(c.stats.mean)));
      cells.push_back(cj);
    }
    j["cells"] = cells;
    json epochs = json::array();
    for (const auto& e : collect_epochs(batch.results)) {
      json ej{{"train_kind", to_string(e.train_kind)}, {"depth", e.depth}, {"width", e.width}};
      ej.update(stats_json(e.stats));
      epochs.push_back(ej);
    }
    j["epochs"] = epochs;
    j["failed_runs"] = failed_runs;
    j["missing"] = missing;
    j["errors"] = batch.errors;
    json paths = json::array();
    for (const auto& f : files) paths.push_back(f.string());
    j["report_files"] = paths;
    out << j.dump(2) << "\n";
  } else if (!batch.results.empty()) {
    print_tables(out);
    out << "\nreport files:\n";
    for (const auto& f : files) out << "  " << f.string() << "\n";
  }
  if (!missing.empty() || !batch.errors.empty()) {
    err << "incomplete: " << missing.size() << " of " << wanted.size()
        << " scenarios have no successful run\n";
    return kExitIncomplete;
  }
  return 0;
}

ExperimentRunner make_runner(const RunArgs& a, std::ostream& err) {
  ExperimentOptions o;
  o.root = store_of(a.common, a.seed);
  o.generator.samples_per_class = a.samples_per_class;
  o.fixed_data = a.fixed_data;
  o.jobs = a.jobs;
  if (!a.common.quiet) o.log = [&err](const std::string& line) { err << line << std::endl; };
  return ExperimentRunner(std::move(o));
}

struct ReproduceArgs {
  RunArgs run;
  std::string scope;
};

int cmd_reproduce(const ReproduceArgs& a, std::ostream& out, std::ostream& err) {
  const auto seeds = run_seeds(a.run.seed, a.run.runs);
  std::vector<Scenario> wanted;
  const bool appendix = a.scope == "appendix";
  if (appendix) {
    wanted = grid_scenarios(kGridDepths, kGridWidths, seeds, a.run.train);
  } else {
    std::vector<DatasetKind> kinds(kAllDatasetKinds.begin(), kAllDatasetKinds.end());
    if (a.scope == "table4") kinds = {DatasetKind::BothCues, DatasetKind::Symbol, DatasetKind::Pattern};
    if (a.scope == "table5") kinds = {DatasetKind::BothCues, DatasetKind::DistBothCues};
    const std::array depth{1};
    const std::array width{100};
    wanted = grid_scenarios(depth, width, seeds, a.run.train, kinds);
  }
  ExperimentRunner runner = make_runner(a.run, err);
  const auto batch = runner.run(wanted);
  auto tables = [&](std::ostream& o) {
    const auto& res = batch.results;
    if (appendix) {
      for (const auto t : kAllDatasetKinds) {
        o << "tested on " << display_name(t) << "\n"
          << render_architecture_table(res, t, ReportFormat::PlainTable) << "\n";
      }
      return;
    }
    const auto stats = aggregate(accuracy_matrix(res, 1, 100));
    if (a.scope == "table3") o << render_overview(stats, ReportFormat::PlainTable);
    if (a.scope == "table4" || a.scope == "table5") {
      o << render_accuracy_matrix(stats, ReportFormat::PlainTable);
    }
    if (a.scope == "table6") o << render_epoch_table(res, 1, 100, ReportFormat::PlainTable);
  };
  return finish_runs(a.run, a.scope, wanted, batch, out, err, tables);
}

struct SweepArgs {
  RunArgs run;
  std::vector<int> depths{kGridDepths.begin(), kGridDepths.end()};
  std::vector<int> widths{kGridWidths.begin(), kGridWidths.end()};
  std::vector<std::string> kinds = kind_names();
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<DatasetKind> kinds;
  for (const auto& k : a.kinds) kinds.push_back(kind_of(k));
  const auto wanted =
      grid_scenarios(a.depths, a.widths, run_seeds(a.run.seed, a.run.runs), a.run.train, kinds);
  ExperimentRunner runner = make_runner(a.run, err);
  const auto batch = runner.run(wanted);
  auto tables = [&](std::ostream& o) {
    for (const auto t : kAllDatasetKinds) {
      o << "tested on " << display_name(t) << "\n"
        << render_architecture_table(batch.results, t, ReportFormat::PlainTable) << "\n";
    }
  };
  return finish_runs(a.run, "sweep", wanted, batch, out, err, tables);
}

struct ReportArgs {
  Common common;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "both";
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path store = store_of(a.common, a.seed);
  const auto results = load_results(store);
  if (results.empty()) {
    err << "error: no results under " << (store / "results").string() << "\n";
    return kExitFailure;
  }
  const fs::path dir = a.out.empty() ? store / "reports" / "all" : fs::path(a.out);
  const auto files = write_reports(results, dir, a.format);
  if (a.common.json) {
    json j;
    j["scenarios"] = results.size();
    json paths = json::array();
    for (const auto& f : files) paths.push_back(f.string());
    j["report_files"] = paths;
    out << j.dump(2) << "\n";
    return 0;
  }
  out << results.size() << " scenarios\n";
  for (const auto& f : files) out << "  " << f.string() << "\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cue-selection experiments on synthetic 30x30 binary images"};
  app.name("cuebias");
  app.require_subcommand(1);
  app.fallthrough(false);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate one split dataset and print its manifest");
  add_common(gen_cmd, gen.common);
  gen_cmd->add_option("--kind", gen.kind, "Dataset kind")->required()->check(CLI::IsMember(kind_names()));
  gen_cmd->add_option("--seed", gen.seed, "Generation seed")->capture_default_str();
  gen_cmd->add_option("--split-seed", gen.split_seed, "Train/test split seed (default: derived from --seed)");
  gen_cmd->add_option("--samples-per-class", gen.samples_per_class, "Images per class")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--out", gen.out, "Output file stem (default: <root>/data/<kind>_seed<seed>)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train one network on a dataset's train split");
  add_common(train_cmd, tr.common);
  train_cmd->add_option("--data", tr.data, "Dataset file stem, or a kind name served from <root>/data")
      ->required();
  train_cmd->add_option("--data-seed", tr.data_seed, "Generation seed when --data is a kind name")
      ->capture_default_str();
  train_cmd->add_option("--depth", tr.depth, "Hidden layers")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--width", tr.width, "Units per hidden layer")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", tr.seed, "Initialization and shuffling seed")->capture_default_str();
  add_training(train_cmd, tr.train);
  train_cmd->add_option("--out", tr.out, "Model file (default: <root>/models/...)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset split");
  add_common(eval_cmd, ev.common);
  eval_cmd->add_option("--model", ev.model, "Model file")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset file stem, or a kind name served from <root>/data")
      ->required();
  eval_cmd->add_option("--data-seed", ev.data_seed, "Generation seed when --data is a kind name")
      ->capture_default_str();
  eval_cmd->add_option("--split", ev.split, "Which split to score")
      ->capture_default_str()
      ->check(CLI::IsMember({"test", "train"}));

  ReproduceArgs rep;
  auto* rep_cmd = app.add_subcommand("reproduce", "Run the scenarios behind one results table");
  add_run_options(rep_cmd, rep.run);
  rep_cmd->add_option("--scope", rep.scope,
                      "table3: symbolic overview, table4/table5: accuracy matrices, table6: "
                      "epoch counts (all at 1x100), appendix: the full depth x width grid")
      ->required()
      ->check(CLI::IsMember({"table3", "table4", "table5", "table6", "appendix"}));

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a depth x width grid for the chosen kinds");
  add_run_options(sweep_cmd, sw.run);
  sweep_cmd->add_option("--depths", sw.depths, "Hidden layer counts")->capture_default_str()->delimiter(',');
  sweep_cmd->add_option("--widths", sw.widths, "Hidden layer widths")->capture_default_str()->delimiter(',');
  sweep_cmd->add_option("--kinds", sw.kinds, "Train kinds")
      ->capture_default_str()
      ->delimiter(',')
      ->check(CLI::IsMember(kind_names()));

  ReportArgs rp;
  auto* report_cmd = app.add_subcommand("report", "Re-emit report files from stored results");
  add_common(report_cmd, rp.common);
  report_cmd->add_option("--seed", rp.seed, "Master seed whose store to read")->capture_default_str();
  report_cmd->add_option("--out", rp.out, "Report directory (default: <store>/reports/all)");
  report_cmd->add_option("--format", rp.format, "Report format")
      ->capture_default_str()
      ->check(CLI::IsMember({"delimited", "plain-table", "both"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, out);
    if (*train_cmd) return cmd_train(tr, out, err);
    if (*eval_cmd) return cmd_eval(ev, out, err);
    if (*rep_cmd) return cmd_reproduce(rep, out, err);
    if (*sweep_cmd) return cmd_sweep(sw, out, err);
    if (*report_cmd) return cmd_report(rp, out, err);
  } catch (const Exit& e) {
    return e.code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace cuebias::cli
