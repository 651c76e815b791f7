#pragma once

#include <stdexcept>
#include <string>

namespace qsmooth {

// Numerical failures: overflow, degenerate normalisation, loss of PSD.
// The CLI maps these to exit status 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent configuration. `key_path()` names the offending
// entry in dotted form ("quantum.omega"). The CLI maps these to exit 2.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : std::runtime_error(key_path.empty() ? what : key_path + ": " + what),
        key_path_(std::move(key_path)) {}

  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

class InvalidGrid : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnsupportedScenario : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TooLarge : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace qsmooth
