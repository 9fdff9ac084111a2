#pragma once

#include <stdexcept>
#include <string>

namespace flexreg {

/// Violated regime or shape precondition (bad exponent range, dimension
/// mismatch, non-positive weight). The CLI maps this to exit status 1.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Iteration cap exceeded or a non-finite value showed up mid-computation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or malformed configuration input. The CLI maps this to exit
/// status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw DomainError(message);
}

}  // namespace detail
}  // namespace flexreg
