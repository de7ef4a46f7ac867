#pragma once

#include <stdexcept>
#include <string>

namespace hhgr {

// Every failure raised by the library derives from Error so callers can map
// it to an exit code without caring which module threw it.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error("data: " + path + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Input violates a documented invariant (bad ids, empty groups, shape mismatches).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range hyperparameter (drop rate, density, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a function precondition (shape mismatch, asymmetric adjacency, missing view).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf encountered in a forward value, gradient or loss.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hhgr
