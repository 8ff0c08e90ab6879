#pragma once

#include <stdexcept>
#include <string>

namespace mvfreg {

// Bad shapes, out-of-range parameters, malformed inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent or unreadable data files. The message carries file and row.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A factorization failed or a problem is too ill-posed to solve as stated.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mvfreg
