#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace netabs {

enum class ErrorCode {
  NonSquare,
  AsymmetricBeyondTol,
  RowMismatch,
  DimensionMismatch,
  NonFiniteState,
  SingularGram,
  C2NotInvertible,
  PNotInjective,
  NoCommonLeftInverse,
  NotRestrictedForm,
  ConditionsNotCertified,
  CertificateInvalid,
  UnsupportedNonlinearity,
  BadDescriptor,
  BadScenario,
  Infeasible,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in the library is reported through this type;
/// `code()` identifies the failing contract, `what()` carries the detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace netabs
