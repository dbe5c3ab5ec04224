#include "udkit/hash.hpp"

#include <fstream>

#include "udkit/error.hpp"

namespace udkit {

uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path + " for checksumming");
  char buf[1 << 16];
  uint64_t h = 0xcbf29ce484222325ull;
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a(std::string_view(buf, static_cast<size_t>(in.gcount())), h);
  }
  return h;
}

}  // namespace udkit
