#pragma once

#include <stdexcept>
#include <string>

namespace softics {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Modbus codec failures.
class EncodingError : public Error {
 public:
  using Error::Error;
};

// Input ended before a complete ADU; the caller should wait for more bytes.
class FramingError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// An attacker profile or attach point tried something it is not wired for.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& what)
      : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// A command that is not valid in the current operating mode.
class CommandError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t offset, const std::string& what)
      : Error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace softics
