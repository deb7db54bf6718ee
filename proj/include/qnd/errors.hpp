#pragma once

#include <stdexcept>
#include <string>

namespace qnd {

// Failure taxonomy shared by the whole library. Every condition maps onto
// one of three process exit codes: configuration problems (2), numerical or
// physical validity problems (3), and I/O problems (4).
enum class ErrKind {
  invalid_config,
  invalid_parameter,
  cutoff,
  accuracy,
  resolution,
  boundary_leak,
  no_signal,
  zero_likelihood,
  insufficient_propagation,
  io,
};

inline const char* to_string(ErrKind k) {
  switch (k) {
    case ErrKind::invalid_config: return "invalid-config";
    case ErrKind::invalid_parameter: return "invalid-parameter";
    case ErrKind::cutoff: return "cutoff";
    case ErrKind::accuracy: return "accuracy";
    case ErrKind::resolution: return "resolution";
    case ErrKind::boundary_leak: return "boundary-leak";
    case ErrKind::no_signal: return "no-signal";
    case ErrKind::zero_likelihood: return "zero-likelihood";
    case ErrKind::insufficient_propagation: return "insufficient-propagation";
    case ErrKind::io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, const std::string& msg)
      : std::runtime_error(std::string(to_string(kind)) + ": " + msg), kind_(kind) {}

  ErrKind kind() const { return kind_; }

  int exit_code() const {
    switch (kind_) {
      case ErrKind::invalid_config:
      case ErrKind::invalid_parameter: return 2;
      case ErrKind::io: return 4;
      default: return 3;
    }
  }

 private:
  ErrKind kind_;
};

[[noreturn]] inline void raise(ErrKind kind, const std::string& msg) { throw Error(kind, msg); }

inline void require(bool cond, ErrKind kind, const std::string& msg) {
  if (!cond) raise(kind, msg);
}

}  // namespace qnd
