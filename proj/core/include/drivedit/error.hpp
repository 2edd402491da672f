#pragma once

#include <stdexcept>
#include <string>

namespace drivedit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (bundle files, OBJ, configs).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure left its valid domain (divergence, non-finite state).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace drivedit
