#pragma once

#include <stdexcept>
#include <string>

namespace cabinsim {

// Base for every error raised by the library. Operations that are total
// (stepping, detection, policy evaluation) never throw.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Names the offending field in what().
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cabinsim
