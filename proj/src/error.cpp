#include "mma/error.hpp"

namespace mma {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownFeature: return "unknown_feature";
    case ErrorCode::kIllegalComparator: return "illegal_comparator";
    case ErrorCode::kInvalidValue: return "invalid_value";
    case ErrorCode::kInvalidStudy: return "invalid_study";
    case ErrorCode::kMenuExhausted: return "menu_exhausted";
    case ErrorCode::kCoverageUnsatisfiable: return "coverage_unsatisfiable";
    case ErrorCode::kEmptyTruth: return "empty_truth";
    case ErrorCode::kTruthMismatch: return "truth_mismatch";
    case ErrorCode::kIllegalTransition: return "illegal_transition";
    case ErrorCode::kMenuViolation: return "menu_violation";
    case ErrorCode::kDuplicateSequence: return "duplicate_sequence";
    case ErrorCode::kSequenceGap: return "sequence_gap";
    case ErrorCode::kMissingStarted: return "missing_started";
    case ErrorCode::kFingerprintMismatch: return "fingerprint_mismatch";
    case ErrorCode::kInvalidPayload: return "invalid_payload";
    case ErrorCode::kPhaseTooEarly: return "phase_too_early";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kIo: return "io_error";
  }
  return "unknown";
}

}  // namespace mma
