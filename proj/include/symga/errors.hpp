#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace symga {

/// Base class for every domain error thrown by this library. Anything that
/// is not a programming error (assert) is reported through a subclass of
/// Error so callers (and the CLI) can map failures to a single exit path.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structural problems found while validating a game description.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class EmptyStateOrActionSet : public ValidationError {
 public:
  explicit EmptyStateOrActionSet(const std::string& what_field)
      : ValidationError("empty state or action set: " + what_field) {}
};

class KernelRowNotStochastic : public ValidationError {
 public:
  KernelRowNotStochastic(int state, int joint_action, double row_sum)
      : ValidationError("kernel row (state " + std::to_string(state) +
                        ", joint action " + std::to_string(joint_action) +
                        ") sums to " + std::to_string(row_sum)),
        state(state),
        joint_action(joint_action),
        row_sum(row_sum) {}
  int state;
  int joint_action;
  double row_sum;
};

class NegativeProbability : public ValidationError {
 public:
  NegativeProbability(const std::string& where, double value)
      : ValidationError("negative probability in " + where + ": " +
                        std::to_string(value)),
        value(value) {}
  double value;
};

class NonFiniteValue : public ValidationError {
 public:
  explicit NonFiniteValue(const std::string& where)
      : ValidationError("non-finite entry in " + where) {}
};

/// Thrown when two containers that must agree in shape do not.
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// Thrown when an operation would enumerate more objects than the configured
/// cap allows (policy grids and joint policy grids grow combinatorially).
class CombinatorialBlowup : public Error {
 public:
  CombinatorialBlowup(const std::string& what_set, double requested,
                      std::uint64_t cap)
      : Error(what_set + " has about " + std::to_string(requested) +
              " elements, above the enumeration cap " + std::to_string(cap)),
        requested(requested),
        cap(cap) {}
  double requested;
  std::uint64_t cap;
};

/// Thrown by strict-mode satisfaction checks when a value sits inside the
/// numerical slack band around the decision threshold, i.e. the solver's
/// accuracy cannot certify the comparison either way.
class IndeterminateMargin : public Error {
 public:
  IndeterminateMargin(double value, double threshold, double slack)
      : Error("margin |" + std::to_string(value) + " - " +
              std::to_string(threshold) + "| is inside the numerical slack " +
              std::to_string(slack)),
        value(value),
        threshold(threshold),
        slack(slack) {}
  double value;
  double threshold;
  double slack;
};

/// A parameter or configuration field is outside its admissible range.
class RangeError : public Error {
 public:
  RangeError(const std::string& field, const std::string& detail)
      : Error("field '" + field + "': " + detail), field(field) {}
  std::string field;
};

/// File or text could not be parsed (JSON, CSV).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// The game failed the symmetry check but a symmetric game was required.
class NotSymmetric : public Error {
 public:
  using Error::Error;
};

/// No quantized equilibrium is available to serve as a path target.
class NoTargetEquilibrium : public Error {
 public:
  using Error::Error;
};

/// Every gap in the profile collapsed to zero, so no positive margin exists.
class AllGapsZero : public Error {
 public:
  using Error::Error;
};

}  // namespace symga
