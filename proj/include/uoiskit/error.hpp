#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace uoiskit {

enum class ErrorKind {
  InvalidDimensions,
  CorruptMask,
  EmptyMask,
  PlacementFailure,
  DatasetError,
  InvalidPrompt,
  SamplingError,
  NumericalError,
  ConfigError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the ErrorKind tags so
/// the CLI can map it onto a stable exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace uoiskit
