#pragma once

#include <stdexcept>
#include <string>

namespace ranksim {

// Single exception type for contract violations and numerical failures.
// Messages are short stable phrases ("empty vector", "diverged", ...) so
// callers and the CLI can match on them.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ranksim
