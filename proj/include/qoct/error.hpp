#pragma once

#include <stdexcept>
#include <string>

namespace qoct {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, out-of-range physical parameters, bad flags.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The computation itself could not be carried out reliably.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class InvalidInterface : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class GainNotSupported : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnsupportedProfile : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DegeneratePair : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SingularStack : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureResolution : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace qoct
