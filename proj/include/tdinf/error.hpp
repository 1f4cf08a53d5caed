#pragma once

#include <stdexcept>
#include <string>

namespace tdinf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix is singular or too close to singular to invert.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// Dimensions of the operands do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of the function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Matrix expected positive semidefinite has a clearly negative eigenvalue.
class NotPsdError : public Error {
 public:
  using Error::Error;
};

/// An iterative method did not converge.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Invalid MDP parameters.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// Overflow or NaN encountered during an iteration.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace tdinf
