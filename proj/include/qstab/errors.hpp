#pragma once

#include <stdexcept>
#include <string>

namespace qstab {

// All library failures derive from Error so callers can catch one type at the
// CLI boundary and map it to exit code 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mismatched or unsupported matrix/vector dimensions.
struct DimensionError : Error {
  using Error::Error;
};

// Structural violations: expected Hermitian/symmetric blocks, malformed
// doubled-up forms, bad coefficient tables.
struct ShapeError : Error {
  using Error::Error;
};

// Linear solve rejected; message carries the condition estimate.
struct SingularityError : Error {
  using Error::Error;
};

// Iteration failures, non-finite intermediates, integrator breakdown.
struct NumericalError : Error {
  using Error::Error;
};

// Bad user-supplied values: config fields, parameter ranges. Messages name
// the offending field path or parameter.
struct ValidationError : Error {
  using Error::Error;
};

// An operation was called outside its stated domain (e.g. certificate ops on
// an infeasible point, frequency response of a non-Hurwitz realization).
struct PreconditionError : Error {
  using Error::Error;
};

// Fock-space dimension too small for the requested polynomial degree.
struct TruncationError : Error {
  using Error::Error;
};

// A quantity the theory guarantees (e.g. nonnegativity) came out violated
// beyond tolerance; indicates a bug, not bad input.
struct InternalConsistencyError : Error {
  using Error::Error;
};

}  // namespace qstab
