#include "common/hash.hpp"

#include <cstdio>

namespace ctae {

std::string hex16(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::string config_hash(const std::string& canonical_text) {
  return hex16(fnv1a64(canonical_text)).substr(0, 12);
}

}  // namespace ctae
