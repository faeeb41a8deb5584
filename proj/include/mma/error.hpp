#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mma {

enum class ErrorCode {
  kUnknownFeature,
  kIllegalComparator,
  kInvalidValue,
  kInvalidStudy,
  kMenuExhausted,
  kCoverageUnsatisfiable,
  kEmptyTruth,
  kTruthMismatch,
  kIllegalTransition,
  kMenuViolation,
  kDuplicateSequence,
  kSequenceGap,
  kMissingStarted,
  kFingerprintMismatch,
  kInvalidPayload,
  kPhaseTooEarly,
  kNotFound,
  kIo,
};

/// Stable snake_case name used in API responses and CLI JSON output.
std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mma
