#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace oinn {

// Base for every error raised by the library. Callers that only care about
// "something in oinn failed" can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes or dimensions do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A graph input or parameter was evaluated without a bound value.
class BindingError : public Error {
 public:
  using Error::Error;
};

// An API was called in a way its contract does not allow.
class UsageError : public Error {
 public:
  using Error::Error;
};

// A matrix factorization failed (e.g. rank-deficient equality constraints).
class FactorizationError : public Error {
 public:
  using Error::Error;
};

// Training or integration produced a non-finite quantity.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// An integration did not reach its final time, so it has no endpoint.
class UnavailableEndpoint : public Error {
 public:
  UnavailableEndpoint(const std::string& what, std::string status)
      : Error(what), status_(std::move(status)) {}
  const std::string& status() const { return status_; }

 private:
  std::string status_;
};

}  // namespace oinn
