#include "cuebias/bitmap.hpp"

#include "cuebias/errors.hpp"

namespace cuebias {

std::vector<std::uint16_t> Bitmap::active_indices() const {
  std::vector<std::uint16_t> out;
  out.reserve(bits_.count());
  for (int i = 0; i < kImageCells; ++i) {
    if (bits_.test(static_cast<std::size_t>(i))) out.push_back(static_cast<std::uint16_t>(i));
  }
  return out;
}

Bitmap::Packed Bitmap::pack() const noexcept {
  Packed out{};
  for (int i = 0; i < kImageCells; ++i) {
    if (bits_.test(static_cast<std::size_t>(i))) {
      out[static_cast<std::size_t>(i / 8)] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
  }
  return out;
}

Bitmap Bitmap::unpack(std::span<const std::uint8_t, kPackedBitmapBytes> bytes) {
  constexpr int kPadding = static_cast<int>(kPackedBitmapBytes * 8) - kImageCells;
  const std::uint8_t pad_mask = static_cast<std::uint8_t>((1u << kPadding) - 1u);
  if ((bytes[kPackedBitmapBytes - 1] & pad_mask) != 0) {
    throw FormatError("bitmap padding bits are not zero");
  }
  Bitmap out;
  for (int i = 0; i < kImageCells; ++i) {
    if (bytes[static_cast<std::size_t>(i / 8)] & (0x80u >> (i % 8))) out.set(i);
  }
  return out;
}

}  // namespace cuebias
