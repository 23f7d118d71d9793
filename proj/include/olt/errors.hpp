#pragma once

#include <stdexcept>
#include <string>

namespace olt {

// Invalid arguments, configs, or preconditions. CLI exit code 2.
class value_error : public std::runtime_error {
 public:
  explicit value_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / dimension mismatches.
class shape_error : public value_error {
 public:
  explicit shape_error(const std::string& msg) : value_error(msg) {}
};

// Corrupt, truncated, or incompatible on-disk data. CLI exit code 3.
class integrity_error : public std::runtime_error {
 public:
  explicit integrity_error(const std::string& msg) : std::runtime_error(msg) {}
};

class checksum_error : public integrity_error {
 public:
  explicit checksum_error(const std::string& msg) : integrity_error(msg) {}
};

class version_error : public integrity_error {
 public:
  explicit version_error(const std::string& msg) : integrity_error(msg) {}
};

class truncation_error : public integrity_error {
 public:
  explicit truncation_error(const std::string& msg) : integrity_error(msg) {}
};

}  // namespace olt
