#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace molbench::util {

/// Incremental FNV-1a 64-bit hash. Multi-byte integers are fed little-endian.
class Fnv1a64 {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  Fnv1a64& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= kPrime;
    }
    return *this;
  }
  Fnv1a64& text(std::string_view s) { return bytes(s.data(), s.size()); }
  Fnv1a64& i32(std::int32_t v) { return le(static_cast<std::uint32_t>(v), 4); }
  Fnv1a64& u64(std::uint64_t v) { return le(v, 8); }

  std::uint64_t value() const { return state_; }

 private:
  Fnv1a64& le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) {
      state_ ^= static_cast<unsigned char>(v >> (8 * i));
      state_ *= kPrime;
    }
    return *this;
  }
  std::uint64_t state_ = kOffset;
};

inline std::uint64_t fnv1a64(std::string_view s) { return Fnv1a64().text(s).value(); }

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

}  // namespace molbench::util
