#pragma once

#include <stdexcept>
#include <string>

namespace kalium {

// Malformed or out-of-contract input: bad files, violated preconditions,
// implausible values. CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numeric degeneracy: singular covariance, zero feature variance, flat
// signals where structure is required. CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kalium
