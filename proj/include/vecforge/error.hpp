#pragma once

#include <stdexcept>
#include <string>

namespace vecforge {

// Base of every error raised by the library. Callers that only need to
// distinguish "bad input data" from "bad arguments" catch the subclasses.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or API misuse (violated preconditions).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Corpus, pair or vector data that cannot be used.
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or corrupt files.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace vecforge
