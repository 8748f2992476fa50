#pragma once

#include <stdexcept>
#include <string>

namespace aqua {

/// Caller broke a documented precondition (shape mismatch, bad argument).
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& msg)
      : std::invalid_argument("contract: " + msg) {}
};

/// An internal consistency check failed (the library itself is at fault).
class InternalError : public std::runtime_error {
 public:
  explicit InternalError(const std::string& msg)
      : std::runtime_error("internal: " + msg) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg)
      : std::runtime_error("io: " + msg) {}
};

/// Malformed file contents (checkpoint, PNG, CSV).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg)
      : std::runtime_error("format: " + msg) {}
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg)
      : std::runtime_error("config: " + msg) {}
};

class ManifestError : public std::runtime_error {
 public:
  explicit ManifestError(const std::string& msg)
      : std::runtime_error("manifest: " + msg) {}
};

}  // namespace aqua
