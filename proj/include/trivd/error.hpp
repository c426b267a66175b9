#pragma once

#include <stdexcept>
#include <string>

namespace trivd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or matrix dimensions that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf where a finite value is required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (bad config, duplicate ids, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace trivd
