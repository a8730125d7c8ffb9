#include "cuebias/checksum.hpp"

#include <charconv>
#include <cstdio>
#include <stdexcept>

namespace cuebias {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
  Fnv1a64 h;
  h.update(bytes);
  return h.digest();
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t from_hex(const std::string& text) {
  std::uint64_t value = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value, 16);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw std::invalid_argument("not a hex value: " + text);
  }
  return value;
}

}  // namespace cuebias
