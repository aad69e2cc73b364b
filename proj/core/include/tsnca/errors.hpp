#pragma once

#include <stdexcept>
#include <string>

namespace tsnca {

// Operand shapes or extents do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A forward result contained NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Misuse of the computation graph (double backward, non-scalar loss, ...).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input values outside their documented range.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace tsnca
