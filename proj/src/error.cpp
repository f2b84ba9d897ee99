#include "yoeo/error.hpp"

namespace yoeo {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::DegenerateExtents: return "DegenerateExtents";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::ZeroMask: return "ZeroMask";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::FormatMismatch: return "FormatMismatch";
    case ErrorCode::DegenerateSpec: return "DegenerateSpec";
    case ErrorCode::SceneMismatch: return "SceneMismatch";
  }
  return "Unknown";
}

}  // namespace yoeo
