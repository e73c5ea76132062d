#pragma once

#include <stdexcept>
#include <string>

namespace partseg {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input text did not match the expected format.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument violated an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised by the argumentation classifier when no stored argument matches.
class UnknownObject : public Error {
 public:
  UnknownObject() : Error("unknown object") {}
};

}  // namespace partseg
