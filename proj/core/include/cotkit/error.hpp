#pragma once

#include <stdexcept>
#include <string>

namespace cotkit {

enum class ErrorCode {
  kInvalidArgument = 2,
  kSchema = 3,
  kIo = 4,
  kAnnotation = 5,
  kTransport = 6,
};

/// Every failure surfaced by the toolkit. The code doubles as the CLI exit
/// status and the number printed in `E<code>: <message>` lines.
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

}  // namespace cotkit
