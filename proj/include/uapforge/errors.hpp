#pragma once

#include <stdexcept>
#include <string>

namespace uapforge {

/// Base of every error the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or batch geometry disagrees with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (missing input, wrong arity).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A numeric parameter is out of its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A dataset, manifest or image could not be read.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Stored bytes fail validation (bad magic, checksum, truncation, bad pixels).
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// A stored artifact violates a domain invariant (e.g. perturbation over budget).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Optimization produced a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace uapforge
