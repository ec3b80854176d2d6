#pragma once

#include <stdexcept>
#include <string>

namespace aerodet {

/// Malformed or inconsistent input data (annotation files, dumps, manifests).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value or unknown configuration key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace aerodet
