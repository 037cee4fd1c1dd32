#pragma once

#include <stdexcept>
#include <string>

namespace igrec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or vector dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation was called in the wrong lifecycle state (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss/gradient or diverged.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Reading or validating an on-disk artifact failed.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace igrec
