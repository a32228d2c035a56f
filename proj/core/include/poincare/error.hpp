#ifndef POINCARE_ERROR_HPP_
#define POINCARE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace poincare {

enum class ErrorCode {
  kInvalidGeometry,
  kEmptyMesh,
  kParse,
  kDegenerateMeasure,
  kInvalidMetric,
  kConvergence,
  kDegenerateVector,
  kDegenerateFactor,
  kDivergence,
  kDomain,
  kSingularCovariance,
  kInvalidArgument,
  kIo,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; `code()` is the
// stable machine-readable part, `what()` carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Eigensolver ran out of iterations; keeps the worst residual seen last.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& message, double last_residual)
      : Error(ErrorCode::kConvergence, message),
        last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidGeometry: return "invalid-geometry";
    case ErrorCode::kEmptyMesh: return "empty-mesh";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kDegenerateMeasure: return "degenerate-measure";
    case ErrorCode::kInvalidMetric: return "invalid-metric";
    case ErrorCode::kConvergence: return "convergence";
    case ErrorCode::kDegenerateVector: return "degenerate-vector";
    case ErrorCode::kDegenerateFactor: return "degenerate-factor";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kSingularCovariance: return "singular-covariance";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

}  // namespace poincare

#endif  // POINCARE_ERROR_HPP_
