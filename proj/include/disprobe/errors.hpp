#pragma once

#include <stdexcept>
#include <string>

namespace disprobe {

struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EncodeError : std::runtime_error {
  explicit EncodeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RangeError : std::runtime_error {
  explicit RangeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StateError : std::runtime_error {
  explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MetricError : std::runtime_error {
  explicit MetricError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CacheError : std::runtime_error {
  explicit CacheError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace disprobe
