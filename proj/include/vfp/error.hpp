#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vfp {

enum class ErrorCode {
  kInvalidArgument,
  kMassMismatch,
  kMarginalMismatch,
  kSolverDiverged,
  kMonotonicityViolation,
  kBoundaryLeakExceeded,
  kUnsupportedInteraction,
  kCflViolation,
  kConfig,
  kIo,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kMassMismatch: return "MASS_MISMATCH";
    case ErrorCode::kMarginalMismatch: return "MARGINAL_MISMATCH";
    case ErrorCode::kSolverDiverged: return "SOLVER_DIVERGED";
    case ErrorCode::kMonotonicityViolation: return "MONOTONICITY_VIOLATION";
    case ErrorCode::kBoundaryLeakExceeded: return "BOUNDARY_LEAK_EXCEEDED";
    case ErrorCode::kUnsupportedInteraction: return "UNSUPPORTED_INTERACTION";
    case ErrorCode::kCflViolation: return "CFL_VIOLATION";
    case ErrorCode::kConfig: return "CONFIG_ERROR";
    case ErrorCode::kIo: return "IO_ERROR";
  }
  return "UNKNOWN";
}

/// Exception carrying a machine-readable code. The message is prefixed with
/// the code name so that logs stay greppable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Re-throws with extra context in front of the message, keeping the code.
  [[noreturn]] static void rethrow_with_context(const Error& e, const std::string& context) {
    std::string msg = e.what();
    const auto prefix = std::string(to_string(e.code())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg = msg.substr(prefix.size());
    throw Error(e.code(), context + ": " + msg);
  }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace vfp
