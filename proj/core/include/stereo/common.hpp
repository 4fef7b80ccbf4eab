#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stereo {

/// Shape/extent violations; message carries both offending shapes.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid user-facing configuration (window sizes, divisibility, toggles).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// API misuse: preconditions of an operation violated by the caller.
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed file content; carries the byte offset of the failure.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::int64_t byte_offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  std::int64_t offset;
};

}  // namespace stereo
