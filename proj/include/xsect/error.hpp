#pragma once

#include <stdexcept>
#include <string>

namespace xsect {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text: carries file and line in the message.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that breaks a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when a backtest bookkeeping invariant fails at runtime.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace xsect
