#pragma once

#include <cstdint>
#include <string>

namespace ctae {

// FNV-1a, stable across platforms; used to name run directories and grid cells.
inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex16(uint64_t v);
std::string config_hash(const std::string& canonical_text);

}  // namespace ctae
