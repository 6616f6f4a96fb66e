#pragma once

#include <stdexcept>
#include <string>

namespace pulseprep {

// Base for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed task: wrong dimensions, non-normalized states, invalid parameters.
class TaskError : public Error {
 public:
  using Error::Error;
};

// Data/model/configuration disagree with each other (qubit count, action set, encoding).
class MismatchError : public Error {
 public:
  using Error::Error;
};

// Unreadable or corrupted file.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace pulseprep
