#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace teamlab {

// FNV-1a, 64-bit: small, dependency-free content fingerprint for manifests.
constexpr std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value);
std::uint64_t fnv1a_file(const std::string& path);

}  // namespace teamlab
