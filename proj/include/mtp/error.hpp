#pragma once
// Error taxonomy shared across the toolchain. Each kind maps to a process
// exit code at the CLI boundary: config=2, transport=3, everything else=1.

#include <stdexcept>
#include <string>

namespace mtp {

enum class ErrorKind {
  Parse,      // malformed text or document
  Input,      // well-formed input violating an operation precondition
  Config,     // missing or unusable configuration/backend
  Transport,  // network or backend failure after retries
  Io,         // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error parse_error(const std::string& msg) { return Error(ErrorKind::Parse, msg); }
inline Error input_error(const std::string& msg) { return Error(ErrorKind::Input, msg); }
inline Error config_error(const std::string& msg) { return Error(ErrorKind::Config, msg); }
inline Error transport_error(const std::string& msg) { return Error(ErrorKind::Transport, msg); }
inline Error io_error(const std::string& msg) { return Error(ErrorKind::Io, msg); }

}  // namespace mtp
