// Copyright 2026 The SemProbe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semprobe {

enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kBackendUnavailable,
  kValidation,
  kConflict,
  kInternal,
  kFormat,
  kProtocol,
  kEmptyMask,
  kTemplate,
  kUnresolvedPlaceholder,
  kGenerationFailed,
  kTimeout,
  kIo,
  kWriteOnce,
  kIntegrity,
  kRejected,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// the gateway can map it to a stable API error without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for failures that may succeed on retry (transport-level).
  bool retryable() const noexcept {
    return code_ == ErrorCode::kBackendUnavailable;
  }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace semprobe
