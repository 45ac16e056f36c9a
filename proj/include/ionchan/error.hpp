#pragma once

#include <stdexcept>
#include <string>

namespace ionchan {

// Root of every error the core throws; the C API maps subclasses to status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

// Syntax: malformed text or unknown key. Value: a known key with a bad value.
class ConfigError : public Error {
 public:
  enum Kind { Syntax, Value };

  ConfigError(const std::string& msg, int line = 0, std::string key = {}, Kind kind = Syntax)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line),
        key_(std::move(key)),
        kind_(kind) {}
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }
  Kind kind() const noexcept { return kind_; }

 private:
  int line_;
  std::string key_;
  Kind kind_;
};

// Thinning probability exceeded one: the declared rate bound was wrong.
class BoundViolation : public Error {
 public:
  BoundViolation(const std::string& msg, double time, int compartment)
      : Error(msg), time_(time), compartment_(compartment) {}
  double time() const noexcept { return time_; }
  int compartment() const noexcept { return compartment_; }

 private:
  double time_;
  int compartment_;
};

class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& msg, double time) : Error(msg), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ionchan
