#pragma once

#include <stdexcept>
#include <string>

namespace mculcb {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The sampling budget cannot accommodate the requested schedule.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// A statistic was requested on a node holding too few samples.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// An internal invariant was violated; indicates a bug, not bad input.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace mculcb
