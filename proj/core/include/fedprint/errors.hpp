#pragma once

#include <stdexcept>
#include <string>

namespace fedprint {

// Every error thrown by the library derives from Error. The CLI maps the
// concrete type onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid scenario/profile/aggregator parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Arguments that violate an operation's precondition (shape, emptiness).
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset or checkpoint content. Carries the 1-based line number
// when the failure is tied to a line of a text file (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedprint
