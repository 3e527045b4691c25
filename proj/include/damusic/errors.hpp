#pragma once

#include <stdexcept>
#include <string>

namespace damusic {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree (non-square EVD input, matvec mismatch, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input values violate a precondition (NaN entries, empty arrays, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A scenario cannot be realized, e.g. the DoA separation guard is infeasible.
class ScenarioError : public Error {
 public:
  using Error::Error;
};

/// Permutation search requested for more sources than supported.
class UnsupportedOrderError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a dataset / checkpoint / CSV failed.
class PersistenceError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration failed validation. `field` names the offender.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace damusic
