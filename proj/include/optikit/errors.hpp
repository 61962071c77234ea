#pragma once

#include <stdexcept>
#include <string>

namespace optikit {

// Invalid or inconsistent user configuration. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Objective evaluated outside its domain (e.g. at a pole).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace optikit
