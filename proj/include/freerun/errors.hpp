#pragma once

#include <stdexcept>
#include <string>

namespace freerun {

/// Bad input data: malformed files, mismatched lengths, degenerate channels.
/// Maps to CLI exit code 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The optimizer could not produce a step (factorization breakdown, non-finite start).
/// Maps to CLI exit code 2.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Programmer fault: inconsistent shapes handed to a numerical kernel.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace freerun
