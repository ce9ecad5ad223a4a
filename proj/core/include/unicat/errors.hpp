#pragma once

#include <stdexcept>
#include <string>

namespace unicat {

// Error taxonomy. The CLI maps each family onto a stable exit code:
// ConfigError -> 2, DataError (and subclasses) -> 3, NumericError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class IndexError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Batch composition, batch statistics, PK sampling, query/gallery splitting.
class BatchError : public DataError {
 public:
  using DataError::DataError;
};

// Degenerate embeddings, every query skipped.
class EvaluationError : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Operation called on an object in the wrong state (e.g. backward on an
// eval-mode forward cache).
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace unicat
