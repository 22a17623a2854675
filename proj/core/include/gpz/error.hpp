#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gpz {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value (diverged training, zero
/// probability under a target, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A binary file could not be parsed. Carries the failing field and the byte
/// offset at which it starts.
class FormatError : public Error {
 public:
  FormatError(std::string field, std::size_t offset, const std::string& what)
      : Error("parse error at byte " + std::to_string(offset) + " (" + field +
              "): " + what),
        field_(std::move(field)),
        offset_(offset) {}

  const std::string& field() const noexcept { return field_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string field_;
  std::size_t offset_;
};

}  // namespace gpz
