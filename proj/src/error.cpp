#include "mwp/error.hpp"

namespace mwp {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Format: return "format error";
    case ErrorCode::Evaluation: return "evaluation error";
    case ErrorCode::Backend: return "backend error";
    case ErrorCode::Config: return "config error";
    case ErrorCode::Internal: return "internal error";
  }
  return "unknown error";
}

}  // namespace mwp
