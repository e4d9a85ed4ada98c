#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace droidmeter {

/// Base class for all droidmeter errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ui_tree
class MalformedDump : public Error {
 public:
  using Error::Error;
};
class PathMismatch : public Error {
 public:
  using Error::Error;
};

// device
class Unsupported : public Error {
 public:
  using Error::Error;
};
class LaunchFailed : public Error {
 public:
  using Error::Error;
};
class DumpFailed : public Error {
 public:
  using Error::Error;
};
class InjectFailed : public Error {
 public:
  using Error::Error;
};
class CaptureFailed : public Error {
 public:
  using Error::Error;
};
class ForwardFailed : public Error {
 public:
  using Error::Error;
};

// transition model
class NondeterministicEdge : public Error {
 public:
  NondeterministicEdge(const std::string& what, std::uint64_t observed_digest)
      : Error(what), observed_digest(observed_digest) {}
  std::uint64_t observed_digest;
};
class Unreachable : public Error {
 public:
  using Error::Error;
};

// collector / networking
class NetError : public Error {
 public:
  using Error::Error;
};
class ProtocolError : public Error {
 public:
  using Error::Error;
};
class PortInUse : public Error {
 public:
  using Error::Error;
};

// metrics
class ResolutionMismatch : public Error {
 public:
  using Error::Error;
};
class NonMonotonicTimestamps : public Error {
 public:
  using Error::Error;
};

// persistence / config
class IoError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace droidmeter
