#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hypersched {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed document (search-space file, run config, scenario). Carries the
// path of the offending node when one is known.
class ParseError : public Error {
 public:
  ParseError(std::string path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message),
        path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Wire-protocol violation; code is machine readable ("bad_frame", "bad_schema", ...).
class ProtocolError : public Error {
 public:
  ProtocolError(std::string code, const std::string& detail)
      : Error(code + ": " + detail), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

}  // namespace hypersched
