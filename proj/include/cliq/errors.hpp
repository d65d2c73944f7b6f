#pragma once

#include <stdexcept>
#include <string>

namespace cliq {

// Running statistics of a normalization bank failed validation (e.g. a
// negative stored variance) or a frozen bank was used in a mutating mode.
class CorruptBankError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An experiment configuration could not be parsed or validated. Mapped to
// exit code 2 by the CLI.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A checkpoint on disk is unreadable. Mapped to exit code 3 by the CLI.
class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { version_mismatch, truncated, checksum_mismatch, malformed };

  CheckpointError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace cliq
