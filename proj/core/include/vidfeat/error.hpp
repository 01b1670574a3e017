#pragma once

#include <stdexcept>
#include <string>

namespace vidfeat {

// File and container failures, tagged so callers can tell them apart.
class IoError : public std::runtime_error {
 public:
  enum class Kind {
    missing_file,
    corrupt_header,
    truncated_payload,
    bad_format,
  };

  IoError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Rejected configuration; the message names the violated constraint.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A solver failed to make progress or produced non-finite values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vidfeat
