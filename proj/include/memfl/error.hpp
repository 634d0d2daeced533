#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memfl {

enum class ErrorCode {
  kMalformedRef,
  kNotFound,
  kAmbiguous,
  kManifestInvalid,
  kIndexError,
  kUnresolvedCoverage,
  kValidation,
  kProviderUnavailable,
  kCassetteMiss,
  kScriptExhausted,
  kInvalidInput,
  kCorruptMemoryFile,
  kUnparseableSelection,
  kMissingPatch,
  kInvalidBatch,
  kLeakage,
  kMissingTruth,
  kConfig,
  kIo,
};

/// Machine-readable name, e.g. "CassetteMiss".
std::string_view error_code_name(ErrorCode code);

/// True for failures that originate in the model provider (exit code 2).
bool is_provider_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace memfl
