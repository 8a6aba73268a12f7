#pragma once

#include <stdexcept>
#include <string>

namespace mwp {

// Error categories; the C API maps each one onto a distinct status code.
enum class ErrorCode {
  InvalidArgument,
  Io,
  Format,
  Evaluation,
  Backend,
  Config,
  Internal,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised while computing the value of an equation tree.
class EvalError : public Error {
 public:
  enum class Kind { DivisionByZero, ZeroToNegativePower, Overflow, Domain };

  EvalError(Kind kind, const std::string& message)
      : Error(ErrorCode::Evaluation, message), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace mwp
