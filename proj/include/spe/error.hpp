#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spe {

// Base for every error raised by the library. `code()` is a stable
// machine-readable tag used by the CLI and the HTTP service.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::size_t line)
      : Error("format_error", "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message) : Error("validation_error", message) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message) : Error("not_found", message) {}
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& message) : Error("conflict", message) {}
};

// Pearson or Spearman requested on a list with zero variance.
class UndefinedCorrelation : public Error {
 public:
  explicit UndefinedCorrelation(const std::string& message)
      : Error("undefined_correlation", message) {}
};

// Training stopped by its stop callback (the service's request deadline).
class TrainingCancelled : public Error {
 public:
  explicit TrainingCancelled(const std::string& message) : Error("timeout", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io_error", message) {}
};

}  // namespace spe
