#pragma once

#include <stdexcept>
#include <string>

namespace stratreg {

enum class ErrorCode {
  DimensionMismatch,
  ZeroProbability,
  DegenerateMoment,
  DuplicatePoint,
  InvalidCost,
  InvalidScalarization,
  InvalidPopulation,
  InvalidProfile,
  SingularInformation,
  ZeroPrecision,
  ExactTooLarge,
  SingularDrawMass,
  CountMismatch,
  TooManyDegenerateDraws,
  TooManyVariables,
  InfiniteValue,
  ZeroMass,
  NonMonomial,
  BadExponents,
  NonPositiveValue,
  TooFewPoints,
  BoundFactorUndefined,
  NotConverged,
  Config,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stratreg
