#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xaw {

/// Input that violates an operation's preconditions.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed file content. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Overflow/underflow or non-finite values during numerical work.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t iteration = 0)
      : std::runtime_error(what), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

/// API misuse, e.g. backward without a cached forward pass.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace xaw
