#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ccert {

// All library failures derive from Error so callers can catch one type; the
// CLI maps the concrete subclasses onto stable exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised when an identity that must hold up to round-off is violated by more
// than the round-off budget (e.g. a KL below -1e-9).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class FitDegenerate : public Error {
 public:
  using Error::Error;
};

class SearchFailed : public Error {
 public:
  using Error::Error;
};

class CacheMismatch : public Error {
 public:
  using Error::Error;
};

class DivergedError : public Error {
 public:
  DivergedError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace ccert
