#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace yoeo {

// Numeric values are stable: the CLI prints them as "YOEO-E<code>:".
enum class ErrorCode : int {
  InvalidArgument = 1,
  Io = 2,
  DegenerateInput = 3,
  NoConsensus = 4,
  DegenerateExtents = 5,
  EmptyScene = 6,
  TooFewPoints = 7,
  ZeroMask = 8,
  NonFiniteLoss = 9,
  FormatMismatch = 10,
  DegenerateSpec = 11,
  SceneMismatch = 12,
};

std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace yoeo
