#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace arcfit {

/// Input outside an operation's mathematical domain (bad priors, non-monotone
/// positions, NaN data, zero-length windows).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when a minimization cannot produce a usable optimum. Carries the
/// best point seen so far.
class OptimizerError : public std::runtime_error {
 public:
  OptimizerError(const std::string& what, std::vector<double> point, double value)
      : std::runtime_error(what), point_(std::move(point)), value_(value) {}

  const std::vector<double>& point() const noexcept { return point_; }
  double value() const noexcept { return value_; }

 private:
  std::vector<double> point_;
  double value_;
};

/// Malformed text input. line() is 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input that violates a data invariant (e.g. positions not
/// strictly increasing).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened or read.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace arcfit
