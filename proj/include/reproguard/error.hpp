#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reproguard {

// Every failure surfaced by the library carries one of these kinds so that
// callers (the CLI in particular) can map them onto exit codes.
enum class ErrorKind {
  InvalidInput,
  InvalidIndex,
  Domain,
  ConfigRejected,
  MalformedStream,
  TruncatedStream,
  BadMagic,
  UnsupportedVersion,
  LengthOverflow,
  TrailingBytes,
  Parse,
  Io,
  Serialization,
  Internal,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::InvalidIndex: return "invalid-index";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::ConfigRejected: return "config-rejected";
    case ErrorKind::MalformedStream: return "malformed-stream";
    case ErrorKind::TruncatedStream: return "truncated-stream";
    case ErrorKind::BadMagic: return "bad-magic";
    case ErrorKind::UnsupportedVersion: return "unsupported-version";
    case ErrorKind::LengthOverflow: return "length-overflow";
    case ErrorKind::TrailingBytes: return "trailing-bytes";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Serialization: return "serialization";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace reproguard
