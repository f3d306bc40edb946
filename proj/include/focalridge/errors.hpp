#pragma once

#include <stdexcept>

namespace focalridge {

// Root of the library's error hierarchy: every failure thrown by focalridge
// derives from this, so callers can catch a single type at the boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration or data violating a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Problems reading or interpreting an external table.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// A treatment cell whose value is not exactly 0 or 1.
class NonBinaryTreatmentError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// An empty or NaN cell where a value is required.
class MissingValueError : public IngestionError {
 public:
  using IngestionError::IngestionError;
};

// Columns of differing length, or a table row with the wrong field count.
class RowCountMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// No treatment columns were supplied.
class NoTreatmentsError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// The focal column is constant: every row treated, or none.
class ConstantFocalError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A linear system whose factorization cannot be trusted.
class SingularDesignError : public Error {
 public:
  using Error::Error;
};

// Too few observations for the requested quantity (e.g. n <= p).
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// A quantity the library deliberately does not provide.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace focalridge
