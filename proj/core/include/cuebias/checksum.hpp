#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace cuebias {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

// Incremental 64-bit FNV-1a.
class Fnv1a64 {
 public:
  void update(std::span<const std::uint8_t> bytes) noexcept {
    for (const std::uint8_t b : bytes) {
      hash_ ^= b;
      hash_ *= kFnvPrime;
    }
  }
  std::uint64_t digest() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = kFnvOffsetBasis;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;

// 16 lowercase hex digits.
std::string to_hex(std::uint64_t value);
// Throws std::invalid_argument on malformed input.
std::uint64_t from_hex(const std::string& text);

}  // namespace cuebias
