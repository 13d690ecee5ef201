#pragma once

#include <stdexcept>
#include <string>

namespace longmab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or incomplete configuration; raised before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A malformed dataset record. `line` is 1-based, 0 when not line-bound.
class DatasetError : public Error {
 public:
  DatasetError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A remote request that failed for good, after retries where allowed.
class RequestError : public Error {
 public:
  RequestError(const std::string& what, int attempts, int last_status)
      : Error(what + " (attempts=" + std::to_string(attempts) +
              ", last_status=" + std::to_string(last_status) + ")"),
        attempts_(attempts),
        last_status_(last_status) {}
  int attempts() const noexcept { return attempts_; }
  /// HTTP status of the last attempt; 0 for transport-level failures.
  int last_status() const noexcept { return last_status_; }

 private:
  int attempts_;
  int last_status_;
};

/// A response body that does not have the expected shape.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ProbeUnavailable : public Error {
 public:
  using Error::Error;
};

}  // namespace longmab
