#pragma once

#include <stdexcept>
#include <string>

namespace ecc {

/// Bad or missing input data (unreadable file, duplicate id, missing vector).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameter values supplied by the caller.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An internal consistency check failed.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ecc
