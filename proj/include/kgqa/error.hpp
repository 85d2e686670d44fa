#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kgqa {

enum class ErrorCode {
  kUnbalancedDelimiter,
  kInvalidToken,
  kUnknownEntityInQuery,
  kRoleCollision,
  kBadPlaceholder,
  kAllSystemsFailed,
  kEmptyTrainingSet,
  kAdapterUnavailable,
  kNoCandidate,
  kMissingEntry,
  kMalformedTemplate,
  kLengthMismatch,
  kInvalidCombination,
  kIoError,
  kSchemaError,
  kConfigError,
};

inline std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnbalancedDelimiter: return "UnbalancedDelimiter";
    case ErrorCode::kInvalidToken: return "InvalidToken";
    case ErrorCode::kUnknownEntityInQuery: return "UnknownEntityInQuery";
    case ErrorCode::kRoleCollision: return "RoleCollision";
    case ErrorCode::kBadPlaceholder: return "BadPlaceholder";
    case ErrorCode::kAllSystemsFailed: return "AllSystemsFailed";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kAdapterUnavailable: return "AdapterUnavailable";
    case ErrorCode::kNoCandidate: return "NoCandidate";
    case ErrorCode::kMissingEntry: return "MissingEntry";
    case ErrorCode::kMalformedTemplate: return "MalformedTemplate";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kInvalidCombination: return "InvalidCombination";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const { return code_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace kgqa
