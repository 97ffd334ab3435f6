#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace drcnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (not valid JSON / CSV).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Well-formed input whose content violates a schema or an invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Missing field or wrong type; carries the JSON path of the offending field.
class SchemaError : public ValidationError {
 public:
  SchemaError(const std::string& path, const std::string& what)
      : ValidationError(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Invalid configuration values (fractions, sizes, modes).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A metric was requested on a data set lacking one of the two classes.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace drcnn
