#pragma once

#include <stdexcept>
#include <string>

namespace mhmm {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Two points (or a point and a family) live on different manifolds.
class ManifoldMismatchError : public Error {
 public:
  using Error::Error;
};

/// A parameter is outside its admissible range (sigma, eta, probabilities...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A recursion or estimate collapsed numerically (all densities vanished,
/// zero normalizer, ...). Carries the 1-based time/iteration index when known.
class DegeneracyError : public Error {
 public:
  DegeneracyError(const std::string& what, long index)
      : Error(what), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

/// An exact-enumeration guard (|S|^T or |S|^|Z| too large) was exceeded.
class EnumerationGuardError : public Error {
 public:
  using Error::Error;
};

/// Antipodal cancellation in the spherical mean: the resultant vector is ~0.
class DegenerateMeanError : public Error {
 public:
  using Error::Error;
};

/// File / parse problem. Carries the 1-based line number when known (0 = n/a).
class IoError : public Error {
 public:
  explicit IoError(const std::string& what, long line = 0)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace mhmm
