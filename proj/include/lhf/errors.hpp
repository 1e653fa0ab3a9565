#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lhf {

/// Base for every error raised by the toolkit. The CLI maps the concrete
/// type to its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid environment spec or component configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An argument outside an operation's domain.
class InputError : public Error {
 public:
  using Error::Error;
};

/// An operation called out of order (e.g. stepping a finished episode).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Data that is well-formed but semantically wrong (a return above R_max).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content. Carries the offending file and, when known, line.
class FormatError : public Error {
 public:
  FormatError(std::string file, std::size_t line, const std::string& what)
      : Error(file + (line > 0 ? ":" + std::to_string(line) : std::string{}) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  [[nodiscard]] const std::string& file() const noexcept { return file_; }
  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

/// The manifest's format tag is not one this build reads.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// A structural invariant failed (on load or at runtime).
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace lhf
