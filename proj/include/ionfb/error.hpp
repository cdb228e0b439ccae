#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ionfb {

enum class ErrorKind {
  kInvalidParameter,
  kBlueDetuning,
  kHeatingDominates,
  kNotNormalized,
  kUnstable,
  kDegenerateState,
  kDimensionMismatch,
  kTruncationLeakage,
  kStepTooLarge,
  kNormCollapse,
  kSampleRateTooLow,
  kGridMismatch,
  kNoStableGain,
  kConfig,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this type; `kind()` lets callers
// branch on the failure class without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Soft diagnostics (regime violations that do not invalidate a computation).
using Warnings = std::vector<std::string>;

}  // namespace ionfb
