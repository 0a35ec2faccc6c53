#pragma once

#include <stdexcept>
#include <string>

namespace cpmamba {

// Error hierarchy shared by every module. Everything derives from Error so
// callers that only care about "something went wrong" can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised by backward() when the requested loss was not produced on the tape.
class GraphError : public Error {
 public:
  using Error::Error;
};

}  // namespace cpmamba
