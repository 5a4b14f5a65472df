#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rugbayes {

// Base class for every error raised by the engine. The message is prefixed
// with the module that raised it ("ingest: ...").
class Error : public std::runtime_error {
 public:
  Error(std::string_view module, const std::string& message)
      : std::runtime_error(std::string(module) + ": " + message), module_(module) {}

  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// Bad input files, malformed rows, invalid configuration. CLI exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

// Non-finite densities, failed chains, degenerate statistics. CLI exit code 1.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace rugbayes
