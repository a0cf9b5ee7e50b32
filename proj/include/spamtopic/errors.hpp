#pragma once

#include <stdexcept>
#include <string>

namespace spamtopic {

/// Failure families. Each maps onto one CLI exit code and one C API status.
enum class ErrorKind {
  usage,       // bad invocation or unknown option
  validation,  // inputs violate a documented precondition
  io,          // unreadable / unwritable files, corrupt artifacts
  adapter,     // external tool or provider failure that cannot degrade
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error validation_error(const std::string& what) {
  return Error(ErrorKind::validation, what);
}
inline Error io_error(const std::string& what) {
  return Error(ErrorKind::io, what);
}
inline Error adapter_error(const std::string& what) {
  return Error(ErrorKind::adapter, what);
}

}  // namespace spamtopic
