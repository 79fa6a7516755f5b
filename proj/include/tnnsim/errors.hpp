#pragma once

#include <stdexcept>
#include <string>

namespace tnnsim {

/// Invalid or inconsistent configuration value (bad profile, unknown key, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed input file. Carries the byte offset where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Calibration could not bring every anchor inside the hard tolerance.
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(const std::string& what, std::string report)
      : std::runtime_error(what), report_(std::move(report)) {}

  const std::string& report() const noexcept { return report_; }

 private:
  std::string report_;
};

/// Numerical failure during training (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tnnsim
