#pragma once

#include <stdexcept>
#include <string>

namespace hybridnn {

enum class ErrorKind {
  invalid_cutoff,
  shape,
  invalid_modes,
  degenerate_state,
  range,
  calibration_failure,
  numerical,
  configuration,
  not_found,
  io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Library-wide exception. `kind()` lets callers branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::invalid_cutoff: return "invalid cutoff";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::invalid_modes: return "invalid modes";
    case ErrorKind::degenerate_state: return "degenerate state";
    case ErrorKind::range: return "range error";
    case ErrorKind::calibration_failure: return "calibration failure";
    case ErrorKind::numerical: return "numerical error";
    case ErrorKind::configuration: return "configuration error";
    case ErrorKind::not_found: return "not found";
    case ErrorKind::io: return "i/o error";
  }
  return "error";
}

}  // namespace hybridnn
