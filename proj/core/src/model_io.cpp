#include <bit>
#include <cstdio>
#include <string_view>

#include "cuebias/checksum.hpp"
#include "cuebias/errors.hpp"
#include "cuebias/fileio.hpp"
#include "cuebias/mlp.hpp"

namespace cuebias {

namespace {

constexpr std::string_view kModelMagic = "CUENN1";

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("model file is truncated");
  }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const NetworkParameters<float>& params) {
  const NetworkConfig cfg = params.config();
  const auto widths = cfg.widths();
  std::vector<std::uint8_t> out;
  out.reserve(64 + params.parameter_count() * 4);
  out.insert(out.end(), kModelMagic.begin(), kModelMagic.end());
  put_u32(out, kModelFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const int w : widths) put_u32(out, static_cast<std::uint32_t>(w));
  for (const auto& layer : params.layers) {
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) put_f32(out, layer.weights.data()[i]);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) put_f32(out, layer.bias[i]);
  }
  put_u64(out, fnv1a64(out));
  return out;
}

NetworkParameters<float> decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kModelMagic.size() + 8 + 8 ||
      !std::equal(kModelMagic.begin(), kModelMagic.end(), bytes.begin())) {
    throw FormatError("not a model file (bad magic)");
  }
  const auto body = bytes.first(bytes.size() - 8);
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) {
    stored |= static_cast<std::uint64_t>(bytes[body.size() + static_cast<std::size_t>(i)]) << (8 * i);
  }
  if (fnv1a64(body) != stored) throw ChecksumMismatch("model checksum mismatch");

  Reader in(body);
  in.skip(kModelMagic.size());
  const std::uint32_t version = in.u32();
  if (version != kModelFormatVersion) {
    throw VersionMismatch("unsupported model format version " + std::to_string(version));
  }
  const std::uint32_t layer_count = in.u32();
  if (layer_count < 1 || layer_count > 1024) throw FormatError("implausible layer count");
  std::vector<int> widths(layer_count + 1);
  for (auto& w : widths) {
    w = static_cast<int>(in.u32());
    if (w < 1) throw FormatError("invalid layer width");
  }
  NetworkParameters<float> p;
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    DenseLayer<float> layer{RowMatrix<float>(widths[l], widths[l + 1]),
                            RowVector<float>(widths[l + 1])};
    in.need(static_cast<std::size_t>(layer.weights.size() + layer.bias.size()) * 4);
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = in.f32();
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = in.f32();
    p.layers.push_back(std::move(layer));
  }
  if (in.pos() != body.size()) throw FormatError("trailing bytes in model file");
  return p;
}

void save_model(const NetworkParameters<float>& params, const std::filesystem::path& path) {
  const auto bytes = encode_model(params);
  write_file_atomically(path, bytes);
}

NetworkParameters<float> load_model(const std::filesystem::path& path) {
  return decode_model(read_file(path));
}

void write_train_log(const TrainReport& report, const std::filesystem::path& path) {
  std::string text = "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t i = 0; i < report.epoch_loss.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i + 1, report.epoch_loss[i]);
    text += buf;
  }
  write_file_atomically(path, text);
}

}  // namespace cuebias
