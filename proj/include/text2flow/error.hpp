#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace text2flow {

enum class ErrorCode {
  InvalidArgument,
  NotFound,
  Precondition,
  Cycle,
  LimitExceeded,
  Transport,
  EmptyResponse,
  Io,
  Config,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::NotFound: return "not found";
    case ErrorCode::Precondition: return "precondition violated";
    case ErrorCode::Cycle: return "cycle detected";
    case ErrorCode::LimitExceeded: return "limit exceeded";
    case ErrorCode::Transport: return "transport failure";
    case ErrorCode::EmptyResponse: return "empty response";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Config: return "configuration error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by backends. `retryable` marks timeouts, 429 and 5xx responses;
// `attempts` is filled in once the retry loop gives up.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool retryable, int attempts = 1)
      : Error(ErrorCode::Transport, message),
        retryable_(retryable),
        attempts_(attempts) {}

  bool retryable() const noexcept { return retryable_; }
  int attempts() const noexcept { return attempts_; }

 private:
  bool retryable_;
  int attempts_;
};

}  // namespace text2flow
