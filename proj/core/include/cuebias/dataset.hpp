#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cuebias/bitmap.hpp"
#include "cuebias/cue_render.hpp"
#include "cuebias/rng.hpp"

namespace cuebias {

enum class ClassLabel : std::uint8_t { I = 0, II = 1, III = 2 };
inline constexpr int kNumClasses = 3;
inline constexpr std::array<ClassLabel, kNumClasses> kAllLabels{ClassLabel::I, ClassLabel::II,
                                                                ClassLabel::III};

constexpr int index_of(ClassLabel l) noexcept { return static_cast<int>(l); }
std::string_view to_string(ClassLabel l) noexcept;

struct ClassSpec {
  ClassLabel label = ClassLabel::I;
  PatternDistribution distribution = PatternDistribution::Uniform;
  std::array<Glyph, kSymbolsPerImage> glyphs{};
};

// I: uniform, +xx.  II: centered, ++x.  III: cornered, +++.
ClassSpec class_spec(ClassLabel label) noexcept;

enum class DatasetKind : std::uint8_t { BothCues = 0, Symbol = 1, Pattern = 2, DistBothCues = 3 };
inline constexpr std::array<DatasetKind, 4> kAllDatasetKinds{
    DatasetKind::BothCues, DatasetKind::Symbol, DatasetKind::Pattern, DatasetKind::DistBothCues};

// "both-cues", "symbol", "pattern", "dist-both-cues"
std::string_view to_string(DatasetKind k) noexcept;
// "Both Cues", "Symbol", "Pattern", "Dist. Both Cues"
std::string_view display_name(DatasetKind k) noexcept;
std::optional<DatasetKind> parse_dataset_kind(std::string_view s) noexcept;

// One of the two distributions that do not belong to `label`, each with
// probability 1/2.
PatternDistribution distorted_pattern(ClassLabel label, RngStream& rng);

struct SampleRecord {
  Bitmap bitmap;
  ClassLabel label = ClassLabel::I;
  bool distorted = false;
  std::optional<PatternDistribution> effective_pattern;
  std::uint32_t sample_index = 0;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct GeneratorConfig {
  int samples_per_class = 10'000;
  double distortion_rate = 0.23;
  double train_fraction = 0.75;
  int pattern_pixels = kPatternPixels;
  double sigma = kDefaultPatternSigma;

  int distorted_per_class() const;
  int train_per_class() const;
  int total_samples() const { return samples_per_class * kNumClasses; }
};

// Precomputed pattern pmfs for one sigma.
class PatternTables {
 public:
  explicit PatternTables(double sigma = kDefaultPatternSigma);
  const std::vector<double>& pmf(PatternDistribution d) const {
    return pmf_[static_cast<std::size_t>(d)];
  }
  double sigma() const noexcept { return sigma_; }

 private:
  double sigma_;
  std::array<std::vector<double>, 3> pmf_;
};

// Throws std::invalid_argument when distorted is set for a kind other than
// DistBothCues.
SampleRecord make_sample(DatasetKind kind, ClassLabel label, bool distorted, RngStream& rng,
                         const PatternTables& tables, int pattern_pixels = kPatternPixels);
SampleRecord make_sample(DatasetKind kind, ClassLabel label, bool distorted, RngStream& rng);

using ClassCounts = std::array<std::size_t, kNumClasses>;

struct DatasetManifest {
  DatasetKind kind = DatasetKind::BothCues;
  std::uint64_t seed = 0;
  std::size_t samples = 0;
  ClassCounts class_counts{};
  std::size_t distorted = 0;
  ClassCounts distorted_per_class{};
  // FNV-1a over the encoded records in sample order.
  std::uint64_t checksum = 0;
};

struct Dataset {
  DatasetKind kind = DatasetKind::BothCues;
  std::uint64_t seed = 0;
  GeneratorConfig config;
  std::vector<SampleRecord> samples;

  DatasetManifest manifest() const;
};

// Sample i (class-major: i / samples_per_class is the class) is drawn from
// RngStream(kind key, i), so samples can be generated in any order or in
// parallel with identical results.
Dataset build_dataset(DatasetKind kind, std::uint64_t seed, const GeneratorConfig& config = {});

// The stream build_dataset uses for sample `index`.
RngStream sample_stream(DatasetKind kind, std::uint64_t seed, std::uint32_t index);

struct SplitDataset {
  DatasetKind kind = DatasetKind::BothCues;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  GeneratorConfig config;
  std::vector<SampleRecord> train;
  std::vector<SampleRecord> test;

  friend bool operator==(const SplitDataset& a, const SplitDataset& b) {
    return a.kind == b.kind && a.seed == b.seed && a.split_seed == b.split_seed &&
           a.train == b.train && a.test == b.test;
  }
};

// Stratified: per class train_fraction goes to train. Train order is
// shuffled; test keeps sample_index order.
SplitDataset split(const Dataset& dataset, std::uint64_t seed);

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr std::string_view kDatasetMagic = "CUEDS1";
inline constexpr std::string_view kIndexMagic = "CUEIDX";
inline constexpr std::size_t kRecordBytes = kPackedBitmapBytes + 3;
inline constexpr std::uint8_t kNoPatternCode = 255;

struct SplitManifest {
  int format_version = kDatasetFormatVersion;
  DatasetKind kind = DatasetKind::BothCues;
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;
  std::size_t samples = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  ClassCounts class_counts{};
  ClassCounts train_class_counts{};
  ClassCounts test_class_counts{};
  std::size_t distorted = 0;
  int pattern_pixels = kPatternPixels;
  double sigma = kDefaultPatternSigma;
  // FNV-1a over the whole .bin payload.
  std::uint64_t checksum = 0;
};

std::filesystem::path manifest_path(const std::filesystem::path& stem);
std::filesystem::path payload_path(const std::filesystem::path& stem);

// Writes <stem>.manifest.json and <stem>.bin. Returns the manifest written.
SplitManifest save_dataset(const SplitDataset& split, const std::filesystem::path& stem);
// Verifies magic, version and checksum. Throws IoError / FormatError.
SplitDataset load_dataset(const std::filesystem::path& stem);
// Reads only the manifest document.
SplitManifest read_manifest(const std::filesystem::path& stem);

SplitManifest make_manifest(const SplitDataset& split);
std::string manifest_to_json(const SplitManifest& m);
SplitManifest manifest_from_json(const std::string& text);

// 116-byte wire record: packed bitmap, label, distorted flag, pattern code.
void encode_record(const SampleRecord& r, std::vector<std::uint8_t>& out);

}  // namespace cuebias
