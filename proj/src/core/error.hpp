#pragma once

#include <stdexcept>
#include <string>

namespace harmonica {

enum class ErrorCode {
  InvalidArgument,
  InvalidDimension,
  Precondition,
  EmptyBall,
  Parse,
  Io,
  Backend,
  Timeout,
  NonDeterministic,
  NonFinite,
  BandOverlap,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the core; the C API maps `code()` onto status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace harmonica
