#pragma once

#include <stdexcept>
#include <string>

namespace greendrl {

// Bad argument to an operation (shape mismatch, out-of-range index, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration; `path` names the offending field when known.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg, std::string path = {})
      : std::runtime_error(path.empty() ? msg : path + ": " + msg), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Operation cannot proceed yet (e.g. replay buffer underfilled); caller retries later.
class NotReady : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace greendrl
