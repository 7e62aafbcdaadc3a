#pragma once

#include <stdexcept>
#include <string>

namespace deep {

// Base class for all data and contract errors raised by the toolkit.
// The CLI maps these to exit code 1; config problems go through
// ConfigError and map to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace deep
