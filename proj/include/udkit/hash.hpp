#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace udkit {

// FNV-1a, for cheap content checksums in run manifests.
inline uint64_t fnv1a(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv1a_file(const std::string& path);

}  // namespace udkit
