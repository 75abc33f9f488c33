#include "uoiskit/error.hpp"

namespace uoiskit {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidDimensions: return "InvalidDimensions";
    case ErrorKind::CorruptMask: return "CorruptMask";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::PlacementFailure: return "PlacementFailure";
    case ErrorKind::DatasetError: return "DatasetError";
    case ErrorKind::InvalidPrompt: return "InvalidPrompt";
    case ErrorKind::SamplingError: return "SamplingError";
    case ErrorKind::NumericalError: return "NumericalError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace uoiskit
