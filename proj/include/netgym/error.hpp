#pragma once

#include <stdexcept>
#include <string>

namespace netgym {

/// Base for every failure raised by the library. The `kind()` string is the
/// classification reported on the wire and in CLI `ERROR:` lines.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define NETGYM_DEFINE_ERROR(Name, Kind)                                \
  class Name : public Error {                                          \
   public:                                                             \
    using Error::Error;                                                \
    const char* kind() const noexcept override { return Kind; }        \
  };

NETGYM_DEFINE_ERROR(RangeError, "range_error")
NETGYM_DEFINE_ERROR(ValidationError, "validation_error")
NETGYM_DEFINE_ERROR(FramingError, "framing_error")
NETGYM_DEFINE_ERROR(SizeError, "size_error")
NETGYM_DEFINE_ERROR(ParseError, "parse_error")
NETGYM_DEFINE_ERROR(ProtocolError, "protocol_error")
NETGYM_DEFINE_ERROR(TransportError, "transport_error")
NETGYM_DEFINE_ERROR(LifecycleError, "lifecycle_error")
NETGYM_DEFINE_ERROR(StartupError, "startup_error")
NETGYM_DEFINE_ERROR(LogicError, "logic_error")

#undef NETGYM_DEFINE_ERROR

/// An ErrorResp received from the peer.
class RemoteError : public ProtocolError {
 public:
  RemoteError(std::string code, std::string detail)
      : ProtocolError(code + ": " + detail), code_(std::move(code)), detail_(std::move(detail)) {}

  const char* kind() const noexcept override { return "remote_error"; }
  const std::string& code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string code_;
  std::string detail_;
};

}  // namespace netgym
