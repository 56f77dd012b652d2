#pragma once

#include <stdexcept>
#include <string>

namespace debias {

enum class ErrorCode {
  InvalidInput,         // non-finite / malformed arguments
  Parse,                // file-format violation
  RowCountMismatch,     // feature and metadata files disagree
  ValueOutOfRange,      // protected value outside schema cardinality
  NonBinaryLabel,       // task label other than 0/1
  MalformedRow,         // unreadable row in a data file
  DegenerateBias,       // zero bias subspace
  DegenerateTarget,     // single-class probe target
  UnconstrainedFallback,// every fairness constraint dropped as degenerate
  Divergence,           // non-finite loss during training
  Io,                   // filesystem failure
  Config,               // invalid experiment configuration
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::RowCountMismatch: return "row-count-mismatch";
    case ErrorCode::ValueOutOfRange: return "value-out-of-range";
    case ErrorCode::NonBinaryLabel: return "non-binary-label";
    case ErrorCode::MalformedRow: return "malformed-row";
    case ErrorCode::DegenerateBias: return "degenerate-bias";
    case ErrorCode::DegenerateTarget: return "degenerate-target";
    case ErrorCode::UnconstrainedFallback: return "unconstrained-fallback";
    case ErrorCode::Divergence: return "divergence";
    case ErrorCode::Io: return "io";
    case ErrorCode::Config: return "config";
  }
  return "unknown";
}

}  // namespace debias
