#pragma once

#include <stdexcept>
#include <string>

namespace sbd {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Cardinality beyond the limit of an exhaustive enumeration.
class SizeError : public Error {
public:
  using Error::Error;
};

/// A configuration that violates FiniteConfiguration invariants.
class InvalidConfiguration : public Error {
public:
  using Error::Error;
};

/// Rate model used outside its domain (x in xi, vanishing death, bad parameters).
class ModelViolation : public Error {
public:
  using Error::Error;
};

/// A higher correlation order is required but no closure was selected.
class TruncationError : public Error {
public:
  using Error::Error;
};

/// Blow-up, negativity, population overflow or refused iteration.
class NumericalAbort : public Error {
public:
  using Error::Error;
};

/// Numerically observed constants exceed the declared ones.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace sbd
