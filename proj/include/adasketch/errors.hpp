#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace adasketch {

/// Failure categories raised by the library. The CLI maps these onto exit codes.
enum class Errc {
  InvalidArgument,
  DimensionMismatch,
  NotPositiveDefinite,
  NotPowerOfTwo,
  ConvergenceFailure,
  InvalidDecay,
  MalformedCsv,
  NonNumericField,
  SketchTooLarge,
  InvalidSparsity,
  InvalidProbability,
  NegativeValue,
  BreakdownDetected,
  IoError,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace adasketch
