#include "cuebias/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

#include "cuebias/errors.hpp"
#include "cuebias/fileio.hpp"

namespace cuebias {

namespace {

using Rows = std::vector<std::vector<std::string>>;

constexpr char kNetworkLetters[] = {'A', 'B', 'C', 'D'};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string kind_name(DatasetKind k, ReportFormat f) {
  return std::string(f == ReportFormat::Delimited ? to_string(k) : display_name(k));
}

std::string arch_name(int depth, int width) {
  return std::to_string(depth) + "x" + std::to_string(width);
}

std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (const unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

std::string render(const std::vector<std::string>& header, const Rows& rows, ReportFormat f) {
  std::string out;
  if (f == ReportFormat::Delimited) {
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }
  std::vector<std::size_t> widths(header.size(), 0);
  auto measure = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      widths[i] = std::max(widths[i], display_width(cells[i]));
    }
  };
  measure(header);
  for (const auto& r : rows) measure(r);
  auto line = [&](const std::vector<std::string>& cells) {
    std::string text;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text += "  ";
      text += cells[i];
      if (i + 1 < cells.size()) text.append(widths[i] - display_width(cells[i]), ' ');
    }
    out += text + '\n';
  };
  line(header);
  std::size_t total = 0;
  for (const auto w : widths) total += w;
  out += std::string(total + 2 * (widths.size() - 1), '-') + '\n';
  for (const auto& r : rows) line(r);
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path,
                                                 const std::string& expected_header) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != expected_header) {
    throw FormatError("unexpected header in " + path.string());
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(split_fields(line));
  }
  return rows;
}

DatasetKind kind_field(const std::string& s, const std::filesystem::path& path) {
  const auto k = parse_dataset_kind(s);
  if (!k) throw FormatError("unknown dataset kind '" + s + "' in " + path.string());
  return *k;
}

std::vector<std::string> stats_fields(const CellStats& s) {
  return {std::to_string(s.n), num(s.mean), s.sem ? num(*s.sem) : "", num(s.min), num(s.max)};
}

CellStats parse_stats(const std::vector<std::string>& f, std::size_t at,
                      const std::filesystem::path& path) {
  try {
    CellStats s;
    s.n = std::stoull(f.at(at));
    s.mean = std::stod(f.at(at + 1));
    if (!f.at(at + 2).empty()) s.sem = std::stod(f.at(at + 2));
    s.min = std::stod(f.at(at + 3));
    s.max = std::stod(f.at(at + 4));
    return s;
  } catch (const std::exception&) {
    throw FormatError("bad statistics row in " + path.string());
  }
}

const ScenarioResult* find(std::span<const ScenarioResult> results, DatasetKind kind, int depth,
                           int width) {
  for (const auto& r : results) {
    if (r.scenario.train_kind == kind && r.scenario.depth() == depth && r.scenario.width() == width) {
      return &r;
    }
  }
  return nullptr;
}

constexpr const char* kCellsHeader = "train_kind,depth,width,test_kind,n,mean,sem,min,max";
constexpr const char* kEpochsHeader = "train_kind,depth,width,n,mean,sem,min,max";

}  // namespace

std::string_view to_string(ReportFormat f) noexcept {
  return f == ReportFormat::Delimited ? "delimited" : "plain-table";
}

std::optional<ReportFormat> parse_report_format(std::string_view s) noexcept {
  if (s == "delimited" || s == "csv") return ReportFormat::Delimited;
  if (s == "plain-table" || s == "table" || s == "txt") return ReportFormat::PlainTable;
  return std::nullopt;
}

bool operator==(const CellStats& a, const CellStats& b) {
  if (a.n != b.n) return false;
  if (a.n == 0) return true;
  return a.mean == b.mean && a.sem == b.sem && a.min == b.min && a.max == b.max;
}

bool operator==(const CellRecord& a, const CellRecord& b) {
  return a.train_kind == b.train_kind && a.depth == b.depth && a.width == b.width &&
         a.test_kind == b.test_kind && a.stats == b.stats;
}

bool operator==(const EpochRecord& a, const EpochRecord& b) {
  return a.train_kind == b.train_kind && a.depth == b.depth && a.width == b.width &&
         a.stats == b.stats;
}

std::vector<std::pair<int, int>> architectures(std::span<const ScenarioResult> results) {
  std::set<std::pair<int, int>> seen;
  for (const auto& r : results) seen.emplace(r.scenario.depth(), r.scenario.width());
  return {seen.begin(), seen.end()};
}

std::vector<CellRecord> collect_cells(std::span<const ScenarioResult> results) {
  std::vector<CellRecord> out;
  for (const auto& [depth, width] : architectures(results)) {
    const auto stats = aggregate(accuracy_matrix(results, depth, width));
    for (std::size_t r = 0; r < stats.train_kinds.size(); ++r) {
      for (const auto t : kAllDatasetKinds) {
        out.push_back({stats.train_kinds[r], depth, width, t,
                       stats.cells[r][static_cast<std::size_t>(t)]});
      }
    }
  }
  return out;
}

std::vector<EpochRecord> collect_epochs(std::span<const ScenarioResult> results) {
  std::vector<EpochRecord> out;
  for (const auto& [depth, width] : architectures(results)) {
    for (const auto k : kAllDatasetKinds) {
      if (const auto* r = find(results, k, depth, width)) {
        out.push_back({k, depth, width, aggregate(epoch_counts(*r))});
      }
    }
  }
  return out;
}

std::string format_mean_sem(const CellStats& s, int decimals) {
  if (s.n == 0) return "n/a";
  return fixed(s.mean, decimals) + " ± " + (s.sem ? fixed(*s.sem, decimals) : std::string("n/a"));
}

std::string render_accuracy_matrix(const AggregateStats& stats, ReportFormat format) {
  std::vector<std::string> header{format == ReportFormat::Delimited ? "train_kind" : "trained on"};
  for (const auto t : kAllDatasetKinds) header.push_back(kind_name(t, format));
  Rows rows;
  for (std::size_t r = 0; r < stats.train_kinds.size(); ++r) {
    std::vector<std::string> row{kind_name(stats.train_kinds[r], format)};
    for (const auto& cell : stats.cells[r]) row.push_back(format_mean_sem(cell));
    rows.push_back(std::move(row));
  }
  return render(header, rows, format);
}

std::string render_overview(const AggregateStats& stats, ReportFormat format) {
  const bool csv = format == ReportFormat::Delimited;
  std::vector<std::string> header{"network", csv ? "train_kind" : "trained on",
                                  csv ? "test_kind" : "tested on", csv ? "mean" : "mean %",
                                  "symbol"};
  Rows rows;
  for (std::size_t r = 0; r < stats.train_kinds.size(); ++r) {
    const auto k = stats.train_kinds[r];
    for (const auto t : kAllDatasetKinds) {
      const auto& cell = stats.cells[r][static_cast<std::size_t>(t)];
      std::string mean = cell.n ? (csv ? num(cell.mean) : fixed(cell.mean, 2)) : "n/a";
      std::string sym = cell.n ? std::string(csv ? to_string(symbolize(cell.mean))
                                                 : glyph(symbolize(cell.mean)))
                               : "n/a";
      rows.push_back({std::string(1, kNetworkLetters[static_cast<std::size_t>(k)]),
                      kind_name(k, format), kind_name(t, format), mean, sym});
    }
  }
  return render(header, rows, format);
}

std::string render_epoch_table(std::span<const ScenarioResult> results, int depth, int width,
                               ReportFormat format) {
  Rows rows;
  for (const auto k : kAllDatasetKinds) {
    const auto* r = find(results, k, depth, width);
    if (!r) continue;
    const auto s = aggregate(epoch_counts(*r));
    if (format == ReportFormat::Delimited) {
      rows.push_back({kind_name(k, format), std::to_string(s.n), s.n ? num(s.mean) : "",
                      s.sem ? num(*s.sem) : ""});
    } else {
      rows.push_back({kind_name(k, format), std::to_string(s.n), format_mean_sem(s, 1)});
    }
  }
  if (format == ReportFormat::Delimited) return render({"train_kind", "n", "mean", "sem"}, rows, format);
  return render({"training dataset", "runs", "# epochs"}, rows, format);
}

std::string render_architecture_table(std::span<const ScenarioResult> results,
                                      DatasetKind test_kind, ReportFormat format) {
  const auto archs = architectures(results);
  std::vector<std::string> header{format == ReportFormat::Delimited ? "train_kind" : "trained on"};
  for (const auto& [d, w] : archs) header.push_back(arch_name(d, w));
  Rows rows;
  for (const auto k : kAllDatasetKinds) {
    std::vector<std::string> row{kind_name(k, format)};
    bool any = false;
    for (const auto& [d, w] : archs) {
      const auto stats = aggregate(accuracy_matrix(results, d, w));
      const auto* cells = stats.row(k);
      any = any || cells;
      row.push_back(cells ? format_mean_sem((*cells)[static_cast<std::size_t>(test_kind)]) : "n/a");
    }
    if (any) rows.push_back(std::move(row));
  }
  return render(header, rows, format);
}

std::string render_depth_series(std::span<const ScenarioResult> results, ReportFormat format) {
  const auto cells = collect_cells(results);
  std::vector<const CellRecord*> order;
  for (const auto& c : cells) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(), [](const CellRecord* a, const CellRecord* b) {
    return std::tuple(a->train_kind, a->test_kind, a->width, a->depth) <
           std::tuple(b->train_kind, b->test_kind, b->width, b->depth);
  });
  const bool csv = format == ReportFormat::Delimited;
  Rows rows;
  for (const auto* c : order) {
    rows.push_back({kind_name(c->train_kind, format), kind_name(c->test_kind, format),
                    std::to_string(c->width), std::to_string(c->depth), std::to_string(c->stats.n),
                    c->stats.n ? (csv ? num(c->stats.mean) : fixed(c->stats.mean, 2)) : "",
                    c->stats.sem ? (csv ? num(*c->stats.sem) : fixed(*c->stats.sem, 2)) : ""});
  }
  return render({"train_kind", "test_kind", "width", "depth", "n", "mean", "sem"}, rows, format);
}

std::vector<std::filesystem::path> emit_report(std::span<const ScenarioResult> results,
                                               const std::filesystem::path& dir,
                                               ReportFormat format) {
  if (results.empty()) throw std::invalid_argument("emit_report: no results");
  const std::string ext = format == ReportFormat::Delimited ? ".csv" : ".txt";
  std::vector<std::filesystem::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    const auto path = dir / (name + ext);
    write_file_atomically(path, text);
    written.push_back(path);
  };

  Rows cell_rows;
  for (const auto& c : collect_cells(results)) {
    std::vector<std::string> row{std::string(to_string(c.train_kind)), std::to_string(c.depth),
                                 std::to_string(c.width), std::string(to_string(c.test_kind))};
    for (auto& f : stats_fields(c.stats)) row.push_back(std::move(f));
    cell_rows.push_back(std::move(row));
  }
  put("cells", render(split_fields(kCellsHeader), cell_rows, format));

  Rows epoch_rows;
  for (const auto& e : collect_epochs(results)) {
    std::vector<std::string> row{std::string(to_string(e.train_kind)), std::to_string(e.depth),
                                 std::to_string(e.width)};
    for (auto& f : stats_fields(e.stats)) row.push_back(std::move(f));
    epoch_rows.push_back(std::move(row));
  }
  put("epoch_cells", render(split_fields(kEpochsHeader), epoch_rows, format));

  const auto archs = architectures(results);
  for (const auto& [d, w] : archs) {
    const std::string tag = "_d" + std::to_string(d) + "_w" + std::to_string(w);
    const auto stats = aggregate(accuracy_matrix(results, d, w));
    put("accuracy" + tag, render_accuracy_matrix(stats, format));
    put("overview" + tag, render_overview(stats, format));
    put("epochs" + tag, render_epoch_table(results, d, w, format));
  }
  if (archs.size() > 1) {
    for (const auto t : kAllDatasetKinds) {
      put("architectures_" + std::string(to_string(t)), render_architecture_table(results, t, format));
    }
  }
  put("depth_series", render_depth_series(results, format));
  return written;
}

std::vector<CellRecord> load_cells(const std::filesystem::path& path) {
  std::vector<CellRecord> out;
  for (const auto& f : read_table(path, kCellsHeader)) {
    if (f.size() != 9) throw FormatError("bad row in " + path.string());
    CellRecord c;
    c.train_kind = kind_field(f[0], path);
    c.depth = std::stoi(f[1]);
    c.width = std::stoi(f[2]);
    c.test_kind = kind_field(f[3], path);
    c.stats = parse_stats(f, 4, path);
    out.push_back(c);
  }
  return out;
}

std::vector<EpochRecord> load_epochs(const std::filesystem::path& path) {
  std::vector<EpochRecord> out;
  for (const auto& f : read_table(path, kEpochsHeader)) {
    if (f.size() != 8) throw FormatError("bad row in " + path.string());
    EpochRecord e;
    e.train_kind = kind_field(f[0], path);
    e.depth = std::stoi(f[1]);
    e.width = std::stoi(f[2]);
    e.stats = parse_stats(f, 3, path);
    out.push_back(e);
  }
  return out;
}

}  // namespace cuebias
