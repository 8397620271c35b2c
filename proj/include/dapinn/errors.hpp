#pragma once

#include <stdexcept>
#include <string>

namespace dapinn {

/// Misuse of an API contract (wrong recording, bad dimensions, unknown name).
class UsageError : public std::logic_error {
public:
  explicit UsageError(const std::string& what) : std::logic_error(what) {}
};

/// Invalid configuration supplied by the user (bad scheme string, bad plan).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A floating-point computation left the finite range.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem / IO failure.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// A reference oracle failed to converge; metrics depending on it are omitted.
class ReferenceUnavailable : public std::runtime_error {
public:
  explicit ReferenceUnavailable(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace dapinn
