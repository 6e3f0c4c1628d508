#pragma once

#include <stdexcept>
#include <string>

namespace febounds {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument to an operation (dimension mismatch, alpha out of range, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// A model or chain configuration violates its invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Experiment config does not match the schema. `path` is the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& message)
      : Error(path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class SamplerError : public Error {
 public:
  using Error::Error;
};

// An oracle declined to produce exact values for the requested model.
class OracleRefusal : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace febounds
