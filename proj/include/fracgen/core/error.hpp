#pragma once

#include <stdexcept>
#include <string>

namespace fracgen {

// Error categories map onto process exit codes in the CLI.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingInputError : std::runtime_error {
  explicit MissingInputError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fracgen
