#pragma once

#include <stdexcept>
#include <string>

namespace jointmct {

// Input that cannot be interpreted: bad files, missing columns, unknown levels.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A model or contrast that cannot be fitted/evaluated on the given data.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical routine failed to reach its target (iteration caps, non-PSD input).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace jointmct
