#pragma once

#include <stdexcept>
#include <string>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace evsens {

enum class ErrorKind {
  NonPositiveEffect,
  NonFiniteEffect,
  InvalidStrength,
  InvalidProbability,
  ParseError,
  ValidationError,
  UnresolvedPlaceholder,
  TemplateError,
  UnsupportedProvider,
  MissingCredential,
  TransportError,
  ProviderError,
  MissingTranscript,
  EmptyResponse,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonPositiveEffect: return "NonPositiveEffect";
    case ErrorKind::NonFiniteEffect: return "NonFiniteEffect";
    case ErrorKind::InvalidStrength: return "InvalidStrength";
    case ErrorKind::InvalidProbability: return "InvalidProbability";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::UnresolvedPlaceholder: return "UnresolvedPlaceholder";
    case ErrorKind::TemplateError: return "TemplateError";
    case ErrorKind::UnsupportedProvider: return "UnsupportedProvider";
    case ErrorKind::MissingCredential: return "MissingCredential";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::ProviderError: return "ProviderError";
    case ErrorKind::MissingTranscript: return "MissingTranscript";
    case ErrorKind::EmptyResponse: return "EmptyResponse";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

inline std::optional<ErrorKind> parse_error_kind(std::string_view text) {
  for (int k = 0; k <= static_cast<int>(ErrorKind::IoError); ++k) {
    if (to_string(static_cast<ErrorKind>(k)) == text) return static_cast<ErrorKind>(k);
  }
  return std::nullopt;
}

/// Library-wide exception. `details` carries itemized context such as the
/// list of missing transcript keys or per-field validation messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::vector<std::string> details = {})
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        message_(message),
        details_(std::move(details)) {}

  /// Message without the kind prefix.
  [[nodiscard]] const std::string& message() const noexcept { return message_; }

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  [[nodiscard]] const std::vector<std::string>& details() const noexcept {
    return details_;
  }

  /// HTTP status for transport/provider failures, 0 when not applicable.
  [[nodiscard]] int status() const noexcept { return status_; }
  Error& with_status(int status) noexcept {
    status_ = status;
    return *this;
  }

 private:
  ErrorKind kind_;
  std::string message_;
  std::vector<std::string> details_;
  int status_ = 0;
};

}  // namespace evsens
