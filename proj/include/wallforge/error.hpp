#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace wallforge {

/// Failure classes; the CLI maps each one to its own exit code.
enum class ErrorKind {
  Parse = 2,
  Precondition = 3,
  NonConvergence = 4,
  InvariantViolation = 5,
  DegenerateFamily = 6,
  Domain = 7,
  Io = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Error precondition_error(const std::string& what) {
  return Error(ErrorKind::Precondition, "precondition violated: " + what);
}

inline Error domain_error(const std::string& what) {
  return Error(ErrorKind::Domain, "domain error: " + what);
}

}  // namespace wallforge
