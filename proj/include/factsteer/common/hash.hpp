#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace factsteer {

// 64-bit FNV-1a. Stable across platforms, used for cache keys and the
// deterministic test embedder / tokenizer.
constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept {
  std::uint64_t h = seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// splitmix64 finalizer; decorrelates consecutive seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::string to_hex(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

// Content hash over several fields; a separator byte keeps ("ab","c") and
// ("a","bc") apart.
template <typename... Parts>
std::string content_hash(const Parts&... parts) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  ((h = fnv1a64(std::string_view(parts), h), h = fnv1a64(std::string_view("\x1f", 1), h)), ...);
  return to_hex(h);
}

}  // namespace factsteer
