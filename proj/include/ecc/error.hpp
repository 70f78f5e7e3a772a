#ifndef ECC_ERROR_HPP_
#define ECC_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace ecc {

enum class ErrorKind {
  DegenerateNorm,
  SimplexViolation,
  InvalidShape,
  IndexOutOfRange,
  ShapeMismatch,
  NonMonotonicEpoch,
  InvalidSpec,
  EmptyClass,
  UnseenClass,
  ConvergenceFailure,
  NonFinite,
  InvalidArgument,
  Io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateNorm: return "DegenerateNorm";
    case ErrorKind::SimplexViolation: return "SimplexViolation";
    case ErrorKind::InvalidShape: return "InvalidShape";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonMonotonicEpoch: return "NonMonotonicEpoch";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::UnseenClass: return "UnseenClass";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Library-wide exception. `kind()` identifies the failure class so callers
/// (notably the CLI) can map it to an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace ecc

#endif  // ECC_ERROR_HPP_
