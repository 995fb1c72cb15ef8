#ifndef DWNET_ERROR_HPP
#define DWNET_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dwnet {

/// Failure categories surfaced by the library. Every thrown error carries one
/// of these plus a human-readable message; the CLI maps kinds to exit codes.
enum class ErrorKind {
  InvalidTopology,
  InvalidRouting,
  EmptyBatch,
  ShapeMismatch,
  SizeMismatch,
  NonScalarLoss,
  DegenerateEpsilon,
  NonFinite,
  InfeasibleTraffic,
  Overload,
  Io,
  Parse,
  SchemaVersionMismatch,
  DegenerateSplit,
  DivergedLoss,
  EmptyInput,
  LengthMismatch,
  ZeroActual,
  ZeroVariance,
  ConfigMismatch,
  InvalidConfig,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind),
        message_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The message without the kind prefix (what() carries both).
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace dwnet

#endif  // DWNET_ERROR_HPP
