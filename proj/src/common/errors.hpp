#pragma once

#include <stdexcept>
#include <string>

namespace ctae {

// Error categories map onto CLI exit codes.
enum class ErrorKind {
  config = 2,    // bad config file, bad flag, unknown key
  io = 3,        // missing/corrupt/unwritable file
  numeric = 4,   // NaN loss, divergence, non-finite data
  shape = 5,     // dimension mismatch
  internal = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

}  // namespace ctae
