#pragma once

#include <stdexcept>
#include <string>

namespace dynacl {

// Error taxonomy mirrored by the C API status codes and CLI exit codes:
// config/usage -> 2, data/file -> 3, numeric abort -> 4.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Precondition violations (bad shapes, out-of-range arguments).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void contract(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace dynacl
