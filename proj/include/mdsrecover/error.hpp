#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mdsr {

enum class ErrorKind {
  InvalidInput,
  NumericalFailure,
  RankTooLarge,
  NotEnoughSignal,
  DebiasUnderflow,
  SingleCluster,
  InsufficientSamples,
  DegenerateGap,
  InsufficientCrossings,
};

constexpr std::string_view error_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::RankTooLarge: return "RankTooLarge";
    case ErrorKind::NotEnoughSignal: return "NotEnoughSignal";
    case ErrorKind::DebiasUnderflow: return "DebiasUnderflow";
    case ErrorKind::SingleCluster: return "SingleCluster";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::DegenerateGap: return "DegenerateGap";
    case ErrorKind::InsufficientCrossings: return "InsufficientCrossings";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_name(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorKind::InvalidInput, message);
}

}  // namespace mdsr
