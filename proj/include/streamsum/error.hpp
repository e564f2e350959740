#ifndef STREAMSUM_ERROR_HPP
#define STREAMSUM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace streamsum {

/// Input that is well-formed but violates a domain invariant.
/// The CLI maps this (and ParseError) to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that does not match the expected file schema.
class ParseError : public ValidationError {
 public:
  ParseError(const std::string& where, const std::string& what)
      : ValidationError(where + ": " + what) {}
};

/// Numerical or internal failure during a computation (exit code 2).
class ComputeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace streamsum

#endif
