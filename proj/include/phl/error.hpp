#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace phl {

enum class ErrorKind {
  NotConverged,
  UnstableA,
  SingularInnovations,
  SingularMatrix,
  NotSymmetric,
  NegativeEigenvalue,
  SingularGram,
  TooShort,
  Diverged,
  ShapeMismatch,
  RegimeMismatch,
  MissingKalman,
  DegenerateTerminal,
  SingularKkt,
  NonFinite,
  InvalidModel,
  InvalidConfig,
};

std::string_view to_string(ErrorKind kind);

/// Every failure in the library is reported through this type; `kind()` lets
/// callers (the Monte Carlo harness in particular) decide which failures are
/// recoverable, e.g. a singular Gram matrix at tiny N.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace phl
