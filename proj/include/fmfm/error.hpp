#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fmfm {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kSchemaMismatch,
  kBadFormat,
  kBadVersion,
  kIo,
  kEmptyInput,
  kDiverged,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type. The code is stable and
// is what the CLI prints as the machine-readable part of its error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fmfm
