#pragma once

#include <stdexcept>
#include <string>

namespace udkit {

// Exit-code-bearing error categories for the CLI surface:
//   usage = 1, data = 2, stage = 3.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StageError : std::runtime_error {
  explicit StageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace udkit
