#pragma once

#include <stdexcept>
#include <string>

namespace meshloc {

/// Invalid configuration (bad CLI flags, malformed config keys). CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid or missing data (files, meshes, frames). CLI exit code 3.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A parse failure that carries the offending line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& path, long line, const std::string& what)
      : DataError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Non-finite value produced by a numeric operation.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace meshloc
