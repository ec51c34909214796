#pragma once

#include <stdexcept>
#include <string>

namespace odflow {

// Root of the library's error taxonomy. Everything thrown on bad data or bad
// configuration derives from Error so callers can catch one type at the CLI
// boundary and map it to a nonzero exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text: bad CSV row, wrong column count, unparsable number.
// Messages carry the file path and 1-based line number where possible.
class ParseError : public Error {
 public:
  using Error::Error;
};

// The same (od, day, interval) cell appeared twice in a flow file.
class DuplicateCellError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Structurally valid input whose values violate a documented precondition
// (negative counts, out-of-range probabilities, empty tables, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Requested interval has fewer leading observations than the model needs
// (lag covariates and/or the pre-incident matching window).
class InsufficientHistoryError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Donor pool too small for a synthetic-control or placebo run.
class InsufficientDonorsError : public DomainError {
 public:
  using DomainError::DomainError;
};

// An od/day/interval/station/line identifier that does not exist.
class LookupError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Two stations with no connecting path in the line network.
class UnreachableError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Matrix/vector dimensions that do not line up.
class ShapeError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Regression design matrix rank-deficient beyond the ridge-jitter rescue.
class SingularDesignError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Adjustment-threshold formula hit a (near-)zero denominator, so no finite
// optimum exists.
class DegenerateThresholdError : public DomainError {
 public:
  using DomainError::DomainError;
};

// A training table ended up with zero rows after filtering.
class EmptyTrainingSetError : public DomainError {
 public:
  using DomainError::DomainError;
};

// An evaluation had zero eligible cells.
class EmptyEvaluationError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Bad configuration value (unknown key, wrong type, out of range).
class ConfigError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Filesystem failure (missing file, unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

// Command-line misuse: unknown subcommand/flag, missing required argument.
// Mapped to exit code 2 by the CLI; everything else maps to 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace odflow
