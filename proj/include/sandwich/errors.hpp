#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sandwich {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Construction-time invariant breach (bad probabilities, broken refinement,
// dependent basis, mispriced numeraire, ...). Carries one message per breach
// so callers see everything wrong at once.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : Error(join(issues)), issues_(std::move(issues)) {}
  explicit ValidationError(const std::string& issue)
      : ValidationError(std::vector<std::string>{issue}) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "validation failed:";
    for (const auto& e : v) s += "\n  - " + e;
    return s;
  }
  std::vector<std::string> issues_;
};

// A claim that cannot be priced because it lies outside the marketed span.
class SpanError : public Error {
 public:
  using Error::Error;
};

// The sandwich condition fails: a one-step extension interval came out
// empty (c > d) or a program certifying the condition is unbounded.
// `certificate` is a human-readable description of the violating triple.
class SandwichViolationError : public Error {
 public:
  SandwichViolationError(const std::string& msg, int cell, std::string certificate)
      : Error(msg), cell_(cell), certificate_(std::move(certificate)) {}

  int cell() const { return cell_; }
  const std::string& certificate() const { return certificate_; }

 private:
  int cell_;
  std::string certificate_;
};

// Iteration caps or non-convergence in a numeric kernel.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A density with a zero where strict positivity is required (conditional
// ratios undefined).
class EquivalenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace sandwich
