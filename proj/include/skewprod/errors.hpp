#pragma once

#include <stdexcept>
#include <string>

namespace skewprod {

/// Failure categories. The CLI maps them onto exit codes.
enum class ErrorKind {
  capacity_exhausted,
  hypothesis_violated,
  cone_violation,
  nonpositive_function,
  nonpositive_denominator,
  no_convergence,
  degenerate_fit,
  empty_good_set,
  invalid_argument,
  config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::capacity_exhausted: return "capacity_exhausted";
    case ErrorKind::hypothesis_violated: return "hypothesis_violated";
    case ErrorKind::cone_violation: return "cone_violation";
    case ErrorKind::nonpositive_function: return "nonpositive_function";
    case ErrorKind::nonpositive_denominator: return "nonpositive_denominator";
    case ErrorKind::no_convergence: return "no_convergence";
    case ErrorKind::degenerate_fit: return "degenerate_fit";
    case ErrorKind::empty_good_set: return "empty_good_set";
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::invalid_argument, what);
}

}  // namespace skewprod
