#include "cuebias/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <stdexcept>
#include <system_error>

#include <json.hpp>

#include "cuebias/checksum.hpp"
#include "cuebias/errors.hpp"
#include "cuebias/fileio.hpp"

namespace cuebias {

namespace {

constexpr std::uint64_t kDistortionStreamBase = 0x8000000000000000ULL;
constexpr std::uint64_t kSplitTrainShuffleStream = 0xffffffff00000000ULL;

std::uint64_t dataset_key(DatasetKind kind, std::uint64_t seed) {
  return derive_seed(seed, "dataset", static_cast<std::uint64_t>(kind));
}

std::uint8_t pattern_code(const std::optional<PatternDistribution>& p) {
  return p ? static_cast<std::uint8_t>(*p) : kNoPatternCode;
}

ClassCounts count_labels(const std::vector<SampleRecord>& records) {
  ClassCounts c{};
  for (const auto& r : records) ++c[static_cast<std::size_t>(index_of(r.label))];
  return c;
}

void append_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t read_u32le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::array<std::size_t, 3> counts_from_json(const nlohmann::json& j) {
  return {j.at("I").get<std::size_t>(), j.at("II").get<std::size_t>(),
          j.at("III").get<std::size_t>()};
}

nlohmann::ordered_json counts_to_json(const ClassCounts& c) {
  nlohmann::ordered_json j;
  j["I"] = c[0];
  j["II"] = c[1];
  j["III"] = c[2];
  return j;
}

}  // namespace

std::string_view to_string(ClassLabel l) noexcept {
  switch (l) {
    case ClassLabel::I: return "I";
    case ClassLabel::II: return "II";
    case ClassLabel::III: return "III";
  }
  return "?";
}

ClassSpec class_spec(ClassLabel label) noexcept {
  using enum Glyph;
  switch (label) {
    case ClassLabel::I: return {label, PatternDistribution::Uniform, {Plus, Cross, Cross}};
    case ClassLabel::II: return {label, PatternDistribution::Centered, {Plus, Plus, Cross}};
    case ClassLabel::III: return {label, PatternDistribution::Cornered, {Plus, Plus, Plus}};
  }
  return {};
}

std::string_view to_string(DatasetKind k) noexcept {
  switch (k) {
    case DatasetKind::BothCues: return "both-cues";
    case DatasetKind::Symbol: return "symbol";
    case DatasetKind::Pattern: return "pattern";
    case DatasetKind::DistBothCues: return "dist-both-cues";
  }
  return "?";
}

std::string_view display_name(DatasetKind k) noexcept {
  switch (k) {
    case DatasetKind::BothCues: return "Both Cues";
    case DatasetKind::Symbol: return "Symbol";
    case DatasetKind::Pattern: return "Pattern";
    case DatasetKind::DistBothCues: return "Dist. Both Cues";
  }
  return "?";
}

std::optional<DatasetKind> parse_dataset_kind(std::string_view s) noexcept {
  for (const DatasetKind k : kAllDatasetKinds) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

PatternDistribution distorted_pattern(ClassLabel label, RngStream& rng) {
  const auto own = static_cast<std::uint64_t>(class_spec(label).distribution);
  // Skip the own distribution: offset 1 or 2 modulo 3.
  const std::uint64_t other = (own + 1 + rng.below(2)) % 3;
  return static_cast<PatternDistribution>(other);
}

int GeneratorConfig::distorted_per_class() const {
  return static_cast<int>(std::lround(distortion_rate * samples_per_class));
}

int GeneratorConfig::train_per_class() const {
  return static_cast<int>(std::lround(train_fraction * samples_per_class));
}

PatternTables::PatternTables(double sigma)
    : sigma_(sigma),
      pmf_{pattern_pmf(PatternDistribution::Uniform, sigma),
           pattern_pmf(PatternDistribution::Centered, sigma),
           pattern_pmf(PatternDistribution::Cornered, sigma)} {}

SampleRecord make_sample(DatasetKind kind, ClassLabel label, bool distorted, RngStream& rng,
                         const PatternTables& tables, int pattern_pixels) {
  if (distorted && kind != DatasetKind::DistBothCues) {
    throw std::invalid_argument("only dist-both-cues samples can be distorted");
  }
  const ClassSpec spec = class_spec(label);
  SampleRecord rec;
  rec.label = label;
  rec.distorted = distorted;

  std::vector<SymbolPlacement> placements;
  if (kind != DatasetKind::Pattern) placements = place_symbols(spec.glyphs, rng);

  std::vector<Cell> pattern;
  if (kind != DatasetKind::Symbol) {
    const PatternDistribution dist = distorted ? distorted_pattern(label, rng) : spec.distribution;
    rec.effective_pattern = dist;
    pattern = sample_pattern(tables.pmf(dist), pattern_pixels, rng);
  }
  rec.bitmap = render(placements, pattern);
  return rec;
}

SampleRecord make_sample(DatasetKind kind, ClassLabel label, bool distorted, RngStream& rng) {
  static const PatternTables tables;
  return make_sample(kind, label, distorted, rng, tables);
}

DatasetManifest Dataset::manifest() const {
  DatasetManifest m;
  m.kind = kind;
  m.seed = seed;
  m.samples = samples.size();
  m.class_counts = count_labels(samples);
  Fnv1a64 hash;
  std::vector<std::uint8_t> buf;
  buf.reserve(kRecordBytes);
  for (const auto& s : samples) {
    if (s.distorted) {
      ++m.distorted;
      ++m.distorted_per_class[static_cast<std::size_t>(index_of(s.label))];
    }
    buf.clear();
    encode_record(s, buf);
    hash.update(buf);
  }
  m.checksum = hash.digest();
  return m;
}

Dataset build_dataset(DatasetKind kind, std::uint64_t seed, const GeneratorConfig& config) {
  if (config.samples_per_class < 1) throw std::invalid_argument("samples_per_class must be >= 1");
  const std::uint64_t key = dataset_key(kind, seed);
  const PatternTables tables(config.sigma);
  const int per_class = config.samples_per_class;

  Dataset ds;
  ds.kind = kind;
  ds.seed = seed;
  ds.config = config;
  ds.samples.reserve(static_cast<std::size_t>(config.total_samples()));

  for (const ClassLabel label : kAllLabels) {
    std::vector<bool> distorted(static_cast<std::size_t>(per_class), false);
    if (kind == DatasetKind::DistBothCues) {
      std::vector<int> order(static_cast<std::size_t>(per_class));
      std::iota(order.begin(), order.end(), 0);
      RngStream pick(key, kDistortionStreamBase + static_cast<std::uint64_t>(index_of(label)));
      shuffle(std::span<int>(order), pick);
      for (int i = 0; i < config.distorted_per_class(); ++i) {
        distorted[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
      }
    }
    for (int j = 0; j < per_class; ++j) {
      const auto index = static_cast<std::uint32_t>(index_of(label) * per_class + j);
      RngStream rng(key, index);
      SampleRecord rec = make_sample(kind, label, distorted[static_cast<std::size_t>(j)], rng,
                                     tables, config.pattern_pixels);
      rec.sample_index = index;
      ds.samples.push_back(std::move(rec));
    }
  }
  return ds;
}

RngStream sample_stream(DatasetKind kind, std::uint64_t seed, std::uint32_t index) {
  return RngStream(dataset_key(kind, seed), index);
}

SplitDataset split(const Dataset& dataset, std::uint64_t seed) {
  SplitDataset out;
  out.kind = dataset.kind;
  out.seed = dataset.seed;
  out.split_seed = seed;
  out.config = dataset.config;

  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    by_class[static_cast<std::size_t>(index_of(dataset.samples[i].label))].push_back(i);
  }
  const auto train_per_class = static_cast<std::size_t>(dataset.config.train_per_class());
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < train_per_class) {
      throw std::invalid_argument("split: class has fewer samples than the train quota");
    }
    RngStream rng(seed, c);
    shuffle(std::span<std::size_t>(members), rng);
    train_idx.insert(train_idx.end(), members.begin(),
                     members.begin() + static_cast<std::ptrdiff_t>(train_per_class));
    test_idx.insert(test_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(train_per_class),
                    members.end());
  }
  RngStream order(seed, kSplitTrainShuffleStream);
  shuffle(std::span<std::size_t>(train_idx), order);
  std::sort(test_idx.begin(), test_idx.end());

  out.train.reserve(train_idx.size());
  for (const auto i : train_idx) out.train.push_back(dataset.samples[i]);
  out.test.reserve(test_idx.size());
  for (const auto i : test_idx) out.test.push_back(dataset.samples[i]);
  return out;
}

void encode_record(const SampleRecord& r, std::vector<std::uint8_t>& out) {
  const auto packed = r.bitmap.pack();
  out.insert(out.end(), packed.begin(), packed.end());
  out.push_back(static_cast<std::uint8_t>(index_of(r.label)));
  out.push_back(r.distorted ? 1 : 0);
  out.push_back(pattern_code(r.effective_pattern));
}

std::filesystem::path manifest_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".manifest.json";
  return p;
}

std::filesystem::path payload_path(const std::filesystem::path& stem) {
  auto p = stem;
  p += ".bin";
  return p;
}

SplitManifest make_manifest(const SplitDataset& split) {
  SplitManifest m;
  m.kind = split.kind;
  m.seed = split.seed;
  m.split_seed = split.split_seed;
  m.train_count = split.train.size();
  m.test_count = split.test.size();
  m.samples = m.train_count + m.test_count;
  m.train_class_counts = count_labels(split.train);
  m.test_class_counts = count_labels(split.test);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    m.class_counts[c] = m.train_class_counts[c] + m.test_class_counts[c];
  }
  m.distorted = static_cast<std::size_t>(
      std::count_if(split.train.begin(), split.train.end(), [](auto& r) { return r.distorted; }) +
      std::count_if(split.test.begin(), split.test.end(), [](auto& r) { return r.distorted; }));
  m.pattern_pixels = split.config.pattern_pixels;
  m.sigma = split.config.sigma;
  return m;
}

std::string manifest_to_json(const SplitManifest& m) {
  nlohmann::ordered_json j;
  j["format"] = "cue-dataset";
  j["format_version"] = m.format_version;
  j["kind"] = std::string(to_string(m.kind));
  j["seed"] = m.seed;
  j["split_seed"] = m.split_seed;
  j["samples"] = m.samples;
  j["train_count"] = m.train_count;
  j["test_count"] = m.test_count;
  j["class_counts"] = counts_to_json(m.class_counts);
  j["train_class_counts"] = counts_to_json(m.train_class_counts);
  j["test_class_counts"] = counts_to_json(m.test_class_counts);
  j["distorted"] = m.distorted;
  j["image"] = {{"width", kImageSide}, {"height", kImageSide}, {"bit_order", "row-major, msb-first"}};
  j["pattern_pixels"] = m.pattern_pixels;
  j["sigma"] = m.sigma;
  j["payload_checksum_fnv1a64"] = to_hex(m.checksum);
  return j.dump(2) + "\n";
}

SplitManifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  try {
    SplitManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kDatasetFormatVersion) {
      throw VersionMismatch("unsupported dataset format version " +
                            std::to_string(m.format_version));
    }
    const auto kind = parse_dataset_kind(j.at("kind").get<std::string>());
    if (!kind) throw FormatError("unknown dataset kind in manifest");
    m.kind = *kind;
    m.seed = j.at("seed").get<std::uint64_t>();
    m.split_seed = j.at("split_seed").get<std::uint64_t>();
    m.samples = j.at("samples").get<std::size_t>();
    m.train_count = j.at("train_count").get<std::size_t>();
    m.test_count = j.at("test_count").get<std::size_t>();
    m.class_counts = counts_from_json(j.at("class_counts"));
    m.train_class_counts = counts_from_json(j.at("train_class_counts"));
    m.test_class_counts = counts_from_json(j.at("test_class_counts"));
    m.distorted = j.at("distorted").get<std::size_t>();
    m.pattern_pixels = j.at("pattern_pixels").get<int>();
    m.sigma = j.at("sigma").get<double>();
    m.checksum = from_hex(j.at("payload_checksum_fnv1a64").get<std::string>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
}

SplitManifest save_dataset(const SplitDataset& split, const std::filesystem::path& stem) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  const std::size_t n = split.train.size() + split.test.size();
  std::vector<std::uint8_t> payload;
  payload.reserve(kDatasetMagic.size() + n * kRecordBytes + kIndexMagic.size() + 4 * n);
  payload.insert(payload.end(), kDatasetMagic.begin(), kDatasetMagic.end());
  for (const auto& r : split.train) encode_record(r, payload);
  for (const auto& r : split.test) encode_record(r, payload);
  // Trailing section: sample indices, so a load restores every field.
  payload.insert(payload.end(), kIndexMagic.begin(), kIndexMagic.end());
  for (const auto& r : split.train) append_u32le(payload, r.sample_index);
  for (const auto& r : split.test) append_u32le(payload, r.sample_index);

  SplitManifest m = make_manifest(split);
  m.checksum = fnv1a64(payload);
  write_file_atomically(payload_path(stem), payload);
  const std::string doc = manifest_to_json(m);
  write_file_atomically(manifest_path(stem), doc);
  return m;
}

SplitManifest read_manifest(const std::filesystem::path& stem) {
  return manifest_from_json(read_text_file(manifest_path(stem)));
}

SplitDataset load_dataset(const std::filesystem::path& stem) {
  const SplitManifest m = read_manifest(stem);
  const auto payload = read_file(payload_path(stem));
  if (payload.size() < kDatasetMagic.size() ||
      !std::equal(kDatasetMagic.begin(), kDatasetMagic.end(), payload.begin())) {
    throw FormatError("bad dataset magic in " + payload_path(stem).string());
  }
  if (fnv1a64(payload) != m.checksum) {
    throw ChecksumMismatch("dataset payload checksum mismatch: " + payload_path(stem).string());
  }
  const std::size_t n = m.train_count + m.test_count;
  const std::size_t expected =
      kDatasetMagic.size() + n * kRecordBytes + kIndexMagic.size() + 4 * n;
  if (payload.size() != expected) throw FormatError("dataset payload has unexpected size");

  SplitDataset out;
  out.kind = m.kind;
  out.seed = m.seed;
  out.split_seed = m.split_seed;
  out.config.pattern_pixels = m.pattern_pixels;
  out.config.sigma = m.sigma;
  if (m.class_counts[0] == m.class_counts[1] && m.class_counts[1] == m.class_counts[2]) {
    out.config.samples_per_class = static_cast<int>(m.class_counts[0]);
    if (out.config.samples_per_class > 0) {
      out.config.train_fraction = static_cast<double>(m.train_class_counts[0]) /
                                  static_cast<double>(out.config.samples_per_class);
      out.config.distortion_rate = static_cast<double>(m.distorted) /
                                   static_cast<double>(out.config.total_samples());
    }
  }

  const std::uint8_t* p = payload.data() + kDatasetMagic.size();
  const std::uint8_t* idx = payload.data() + kDatasetMagic.size() + n * kRecordBytes;
  if (!std::equal(kIndexMagic.begin(), kIndexMagic.end(), idx)) {
    throw FormatError("missing sample index section");
  }
  idx += kIndexMagic.size();
  out.train.reserve(m.train_count);
  out.test.reserve(m.test_count);
  for (std::size_t i = 0; i < n; ++i, p += kRecordBytes, idx += 4) {
    SampleRecord r;
    r.bitmap = Bitmap::unpack(std::span<const std::uint8_t, kPackedBitmapBytes>(p, kPackedBitmapBytes));
    const std::uint8_t label = p[kPackedBitmapBytes];
    const std::uint8_t flag = p[kPackedBitmapBytes + 1];
    const std::uint8_t code = p[kPackedBitmapBytes + 2];
    if (label >= kNumClasses || flag > 1 || (code > 2 && code != kNoPatternCode)) {
      throw FormatError("invalid record field at record " + std::to_string(i));
    }
    r.label = static_cast<ClassLabel>(label);
    r.distorted = flag == 1;
    if (code != kNoPatternCode) r.effective_pattern = static_cast<PatternDistribution>(code);
    r.sample_index = read_u32le(idx);
    (i < m.train_count ? out.train : out.test).push_back(std::move(r));
  }
  return out;
}

}  // namespace cuebias
