#pragma once

#include <stdexcept>
#include <string>

namespace lsti {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid WorldConfig, Persona or other static configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An observation or request failed a world rule. `rule()` is the stable id
/// (e.g. "unknown-action") reported to API clients.
class ValidationError : public Error {
 public:
  ValidationError(std::string rule, const std::string& what)
      : Error(what), rule_(std::move(rule)) {}
  const std::string& rule() const noexcept { return rule_; }

 private:
  std::string rule_;
};

/// An event starts before the current world clock.
class OrderingError : public ValidationError {
 public:
  explicit OrderingError(const std::string& what)
      : ValidationError("time-regression", what) {}
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape mismatch.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Malformed file or request payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace lsti
