#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ttc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's input contract (empty candidate list,
/// score outside [0,1], threshold outside (0,1), ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public ContractError {
 public:
  using ContractError::ContractError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Transport, protocol or parse failure at the model boundary. The message
/// carries the raw cause.
class BackendError : public Error {
 public:
  using Error::Error;
};

/// A verification routine was handed inputs that make its check vacuous.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class StructuralError : public Error {
 public:
  using Error::Error;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

/// Malformed records or aggregates file.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ResumeError : public Error {
 public:
  using Error::Error;
};

/// Raised by a strategy when the backend fails mid-run. Keeps the budget
/// consumed up to the failure so the harness can record it.
class RunFailure : public Error {
 public:
  RunFailure(const std::string& cause, std::int64_t partial_cost)
      : Error(cause), partial_cost_(partial_cost) {}

  std::int64_t partial_cost() const noexcept { return partial_cost_; }

 private:
  std::int64_t partial_cost_;
};

}  // namespace ttc
