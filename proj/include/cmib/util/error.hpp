#pragma once

#include <stdexcept>
#include <string>

namespace cmib {

// Base for every error raised by the library. Callers that only need a
// message can catch std::runtime_error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on an argument value was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmib
