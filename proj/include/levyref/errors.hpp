#pragma once

#include <stdexcept>
#include <string>

namespace levyref {

// Machine-readable failure conditions. Each enumerator names one contract
// violation or numerical breakdown; the CLI maps the name into error JSON.
enum class ErrorKind {
  NonConvergence,
  DegenerateRoots,
  DomainError,
  BreakpointMisaligned,
  NonPositiveXi,
  TailNotDecaying,
  DiagonalBlowup,
  MajorantDiverged,
  QueryOutsideGrid,
  SchemeModelMismatch,
  HorizonExhausted,
  NonMonotoneProfile,
  ConfigInvalid,
  IoError,
};

inline const char* error_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::DegenerateRoots: return "DegenerateRoots";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::BreakpointMisaligned: return "BreakpointMisaligned";
    case ErrorKind::NonPositiveXi: return "NonPositiveXi";
    case ErrorKind::TailNotDecaying: return "TailNotDecaying";
    case ErrorKind::DiagonalBlowup: return "DiagonalBlowup";
    case ErrorKind::MajorantDiverged: return "MajorantDiverged";
    case ErrorKind::QueryOutsideGrid: return "QueryOutsideGrid";
    case ErrorKind::SchemeModelMismatch: return "SchemeModelMismatch";
    case ErrorKind::HorizonExhausted: return "HorizonExhausted";
    case ErrorKind::NonMonotoneProfile: return "NonMonotoneProfile";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::IoError: return "IoError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_name(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  const char* name() const noexcept { return error_name(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool cond, ErrorKind kind, const std::string& message) {
  if (!cond) fail(kind, message);
}

} // namespace levyref
