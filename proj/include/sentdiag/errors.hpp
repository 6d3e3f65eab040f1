#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sentdiag {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed corpus record. record_index is 1-based over non-blank records.
class IngestError : public Error {
 public:
  IngestError(std::size_t record_index, std::string field, const std::string& what)
      : Error("record " + std::to_string(record_index) + ", field " + field + ": " + what),
        record_index_(record_index),
        field_(std::move(field)) {}

  std::size_t record_index() const { return record_index_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t record_index_;
  std::string field_;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class AuthorizationError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  NotFoundError(const std::string& what, std::vector<std::string> offenders = {})
      : Error(what), offenders_(std::move(offenders)) {}
  const std::vector<std::string>& offenders() const { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

// A pipeline stage was asked to run before the files it consumes exist.
class DependencyError : public Error {
 public:
  DependencyError(std::string required_file, const std::string& what)
      : Error(what), required_file_(std::move(required_file)) {}
  const std::string& required_file() const { return required_file_; }

 private:
  std::string required_file_;
};

}  // namespace sentdiag
