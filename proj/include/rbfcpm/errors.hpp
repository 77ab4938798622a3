#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rbfcpm {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedStencilSize : public Error {
 public:
  using Error::Error;
};

class EmptyTube : public Error {
 public:
  using Error::Error;
};

class InsufficientNodes : public Error {
 public:
  using Error::Error;
};

/// The closest point is not unique at the query (tube wider than 1/curvature).
class SingularPoint : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class OutsideTube : public Error {
 public:
  using Error::Error;
};

class OffSurface : public Error {
 public:
  using Error::Error;
};

class DuplicateNodes : public Error {
 public:
  using Error::Error;
};

class IllConditioned : public Error {
 public:
  IllConditioned(const std::string& what, double condition_estimate)
      : Error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

class GhostStencilMissing : public Error {
 public:
  using Error::Error;
};

/// Non-finite value or runaway growth during time stepping.
class Diverged : public Error {
 public:
  Diverged(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class NoExactSolution : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyMesh : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration (unknown key, malformed value, bad levels).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rbfcpm
