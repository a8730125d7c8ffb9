#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cuebias {

inline constexpr int kImageSide = 30;
inline constexpr int kImageCells = kImageSide * kImageSide;
// 900 bits rounded up to whole bytes.
inline constexpr std::size_t kPackedBitmapBytes = (kImageCells + 7) / 8;

struct Cell {
  int row = 0;
  int col = 0;

  constexpr int index() const noexcept { return row * kImageSide + col; }
  static constexpr Cell from_index(int index) noexcept {
    return {index / kImageSide, index % kImageSide};
  }
  constexpr bool in_bounds() const noexcept {
    return row >= 0 && row < kImageSide && col >= 0 && col < kImageSide;
  }
  friend constexpr bool operator==(Cell, Cell) = default;
};

// 30x30 binary image, row-major.
class Bitmap {
 public:
  using Packed = std::array<std::uint8_t, kPackedBitmapBytes>;

  bool test(Cell c) const { return bits_.test(static_cast<std::size_t>(c.index())); }
  bool test(int index) const { return bits_.test(static_cast<std::size_t>(index)); }
  void set(Cell c) { bits_.set(static_cast<std::size_t>(c.index())); }
  void set(int index) { bits_.set(static_cast<std::size_t>(index)); }

  int popcount() const noexcept { return static_cast<int>(bits_.count()); }

  // Row-major cell indices of all set cells, ascending.
  std::vector<std::uint16_t> active_indices() const;

  // Cell k lives in byte k / 8 at bit 7 - k % 8 (MSB first); the trailing
  // four bits of the last byte are zero.
  Packed pack() const noexcept;
  // Throws FormatError if any padding bit is set.
  static Bitmap unpack(std::span<const std::uint8_t, kPackedBitmapBytes> bytes);

  friend bool operator==(const Bitmap&, const Bitmap&) = default;

 private:
  std::bitset<kImageCells> bits_;
};

}  // namespace cuebias
