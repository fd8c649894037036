#pragma once

#include <stdexcept>
#include <string>

namespace trendscope {

/// Input failed schema or invariant checks. Maps to CLI exit status 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed JSON on a given input line.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// File system or stream failure. Maps to CLI exit status 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Snapshot file with a foreign magic or unsupported version.
class IncompatibleSnapshotError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace trendscope
