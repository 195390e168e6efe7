#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace esci {

enum class ErrorKind {
  DimensionMismatch,
  NonFinite,
  NotPSD,
  SingularMatrix,
  DegenerateWeights,
  BoundaryWeight,
  InvalidCorrelation,
  WitnessFailed,
  InvalidArgument,
  Schema,
};

std::string_view to_string(ErrorKind kind);

/// Every numeric and validation failure in the library surfaces as a FusionError.
class FusionError : public std::runtime_error {
 public:
  FusionError(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Input-side problems (bad files, malformed arguments) vs. numeric breakdowns.
  bool is_input_error() const noexcept {
    return kind_ == ErrorKind::Schema || kind_ == ErrorKind::InvalidArgument ||
           kind_ == ErrorKind::DimensionMismatch;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw FusionError(kind, what);
}

}  // namespace esci
