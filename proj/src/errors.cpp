#include "adasketch/errors.hpp"

namespace adasketch {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::NotPowerOfTwo: return "NotPowerOfTwo";
    case Errc::ConvergenceFailure: return "ConvergenceFailure";
    case Errc::InvalidDecay: return "InvalidDecay";
    case Errc::MalformedCsv: return "MalformedCsv";
    case Errc::NonNumericField: return "NonNumericField";
    case Errc::SketchTooLarge: return "SketchTooLarge";
    case Errc::InvalidSparsity: return "InvalidSparsity";
    case Errc::InvalidProbability: return "InvalidProbability";
    case Errc::NegativeValue: return "NegativeValue";
    case Errc::BreakdownDetected: return "BreakdownDetected";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace adasketch
