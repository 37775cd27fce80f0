#pragma once

#include <stdexcept>
#include <string>

namespace rjmort {

// Malformed or inconsistent input data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid run configuration or model configuration (CLI exit code 3).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Failure while running a chain (CLI exit code 4).
class ChainError : public std::runtime_error {
 public:
  explicit ChainError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when the b_1 entry is too close to zero to rescale the interaction.
class SingularBridgeError : public std::runtime_error {
 public:
  explicit SingularBridgeError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace rjmort
