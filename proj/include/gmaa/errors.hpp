#pragma once

#include <stdexcept>
#include <string>

namespace gmaa {

/// Malformed `.dpomdp` text. Carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// A model or policy that violates its structural invariants.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configured resource limit (nodes, vectors, time, enumeration size) was hit.
/// Runs that throw this are incomplete, never wrong.
class ResourceCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal consistency check failed.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace gmaa
