#pragma once

#include <stdexcept>
#include <string>

namespace pvalfn {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Root-finding bracket without a sign change.
class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested method, model or feature is not available for the inputs.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Non-finite result where a finite one was required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (CLI, data files, model constants).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pvalfn
