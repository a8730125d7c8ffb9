#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cuebias/experiment.hpp"

namespace cuebias {

enum class ReportFormat : std::uint8_t { Delimited, PlainTable };
std::string_view to_string(ReportFormat f) noexcept;
std::optional<ReportFormat> parse_report_format(std::string_view s) noexcept;

// One aggregated accuracy cell in long form.
struct CellRecord {
  DatasetKind train_kind = DatasetKind::BothCues;
  int depth = 0;
  int width = 0;
  DatasetKind test_kind = DatasetKind::BothCues;
  CellStats stats;
};

struct EpochRecord {
  DatasetKind train_kind = DatasetKind::BothCues;
  int depth = 0;
  int width = 0;
  CellStats stats;
};

// Architectures present in the results, sorted by (depth, width).
std::vector<std::pair<int, int>> architectures(std::span<const ScenarioResult> results);

std::vector<CellRecord> collect_cells(std::span<const ScenarioResult> results);
std::vector<EpochRecord> collect_epochs(std::span<const ScenarioResult> results);

// "96.17 ± 0.08"; "n/a" stands in for an absent SEM.
std::string format_mean_sem(const CellStats& s, int decimals = 2);

// Train kinds by test kinds, "mean ± SEM" cells.
std::string render_accuracy_matrix(const AggregateStats& stats, ReportFormat format);
// Four rows per network: test kind, mean, symbol.
std::string render_overview(const AggregateStats& stats, ReportFormat format);
// One row per train kind with its epoch count.
std::string render_epoch_table(std::span<const ScenarioResult> results, int depth, int width,
                               ReportFormat format);
// Train kinds by architectures for one test kind.
std::string render_architecture_table(std::span<const ScenarioResult> results,
                                      DatasetKind test_kind, ReportFormat format);
// Columns train_kind, test_kind, width, depth, n, mean, sem.
std::string render_depth_series(std::span<const ScenarioResult> results, ReportFormat format);

// Writes every report file into `dir` and returns their paths. Files carry no
// timings, so identical results give identical bytes.
//   cells, epoch_cells                    long-form numbers
//   accuracy_d<D>_w<W>, overview_d<D>_w<W>, epochs_d<D>_w<W>
//   architectures_<test kind>             when more than one architecture ran
//   depth_series
std::vector<std::filesystem::path> emit_report(std::span<const ScenarioResult> results,
                                               const std::filesystem::path& dir,
                                               ReportFormat format);

// Loaders for the delimited long-form files.
std::vector<CellRecord> load_cells(const std::filesystem::path& path);
std::vector<EpochRecord> load_epochs(const std::filesystem::path& path);

bool operator==(const CellStats& a, const CellStats& b);
bool operator==(const CellRecord& a, const CellRecord& b);
bool operator==(const EpochRecord& a, const EpochRecord& b);

}  // namespace cuebias
