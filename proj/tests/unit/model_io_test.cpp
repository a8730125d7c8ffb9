#include <gtest/gtest.h>

#include <bit>

#include "cuebias/checksum.hpp"
#include "cuebias/errors.hpp"
#include "cuebias/fileio.hpp"
#include "cuebias/mlp.hpp"
#include "test_support.hpp"

namespace cuebias {
namespace {

using testing::TempDir;

NetworkParameters<float> sample_params() {
  RngStream rng(21, 0);
  NetworkConfig c;
  c.input_dim = 12;
  c.hidden_layers = {5, 4};
  auto p = init_params<float>(c, rng);
  p.layers[1].bias(2) = -0.25f;
  return p;
}

TEST(ModelIo, RoundTripIsBitExact) {
  const auto p = sample_params();
  const auto bytes = encode_model(p);
  EXPECT_EQ(decode_model(bytes), p);
  // magic + version + layer count + 4 widths + floats + checksum
  const std::size_t floats = 12 * 5 + 5 + 5 * 4 + 4 + 4 * 3 + 3;
  EXPECT_EQ(bytes.size(), 6 + 4 + 4 + 4 * 4 + floats * 4 + 8);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 6), "CUENN1");

  TempDir dir;
  save_model(p, dir / "m.model");
  EXPECT_EQ(load_model(dir / "m.model"), p);
  EXPECT_EQ(read_file(dir / "m.model"), bytes);
}

TEST(ModelIo, LayoutIsLittleEndianRowMajor) {
  const auto p = sample_params();
  const auto bytes = encode_model(p);
  auto u32_at = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  EXPECT_EQ(u32_at(6), 1u);
  EXPECT_EQ(u32_at(10), 3u);
  EXPECT_EQ(u32_at(14), 12u);
  EXPECT_EQ(u32_at(18), 5u);
  EXPECT_EQ(u32_at(22), 4u);
  EXPECT_EQ(u32_at(26), 3u);
  const std::size_t first = 30;
  EXPECT_EQ(std::bit_cast<float>(u32_at(first)), p.layers[0].weights(0, 0));
  EXPECT_EQ(std::bit_cast<float>(u32_at(first + 4)), p.layers[0].weights(0, 1));
  EXPECT_EQ(std::bit_cast<float>(u32_at(first + 4 * 5)), p.layers[0].weights(1, 0));
  const std::span<const std::uint8_t> body(bytes.data(), bytes.size() - 8);
  std::uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
  EXPECT_EQ(stored, fnv1a64(body));
}

TEST(ModelIo, CorruptionIsDetected) {
  auto bytes = encode_model(sample_params());
  auto flipped = bytes;
  flipped[40] ^= 0x01;
  EXPECT_THROW(decode_model(flipped), ChecksumMismatch);

  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(decode_model(magic), FormatError);

  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + 20);
  EXPECT_THROW(decode_model(truncated), FormatError);
}

TEST(ModelIo, VersionMismatchIsRejected) {
  auto bytes = encode_model(sample_params());
  bytes[6] = 2;
  // Re-seal so only the version is wrong.
  const std::span<const std::uint8_t> body(bytes.data(), bytes.size() - 8);
  const std::uint64_t sum = fnv1a64(body);
  for (int i = 0; i < 8; ++i) bytes[bytes.size() - 8 + i] = static_cast<std::uint8_t>(sum >> (8 * i));
  EXPECT_THROW(decode_model(bytes), VersionMismatch);
}

TEST(ModelIo, MissingFileIsAnIoError) {
  TempDir dir;
  EXPECT_THROW(load_model(dir / "absent.model"), IoError);
}

TEST(ModelIo, TrainLogIsEpochAndLoss) {
  TempDir dir;
  TrainReport r;
  r.epoch_loss = {1.5, 0.25};
  write_train_log(r, dir / "log.csv");
  EXPECT_EQ(read_text_file(dir / "log.csv"), "epoch,mean_loss\n1,1.5\n2,0.25\n");
}

}  // namespace
}  // namespace cuebias
