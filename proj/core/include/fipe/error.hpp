#pragma once

#include <stdexcept>
#include <string>

namespace fipe {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: arity mismatch, labels out of range, empty inputs.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

enum class ModelFormatErrc {
  Syntax,
  SchemaViolation,
  NonMonotoneThresholds,
  ScoreOutOfRange,
  DanglingNode,
  UnsupportedVersion,
};

const char* to_string(ModelFormatErrc code);

class ModelFormatError : public Error {
 public:
  ModelFormatError(ModelFormatErrc code, const std::string& what)
      : Error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ModelFormatErrc code() const { return code_; }

 private:
  ModelFormatErrc code_;
};

// No non-negative reweighting satisfies the margin rows of the prune set.
class InfeasiblePruning : public Error {
 public:
  using Error::Error;
};

// The original ensemble is tied (margin below tolerance) on a prune-set entry.
class TiedPrediction : public Error {
 public:
  TiedPrediction(std::size_t entry, const std::string& what)
      : Error(what), entry_(entry) {}
  std::size_t entry() const { return entry_; }

 private:
  std::size_t entry_;
};

class SolverFailure : public Error {
 public:
  using Error::Error;
};

// Brute-force enumeration refused because the cell count exceeds the cap.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

class IterationLimitExceeded : public Error {
 public:
  using Error::Error;
};

// A separating point landed in a cell that is already in the prune set.
class CycleDetected : public Error {
 public:
  using Error::Error;
};

// Violated internal consistency check (e.g. solver tolerance problems).
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace fipe
