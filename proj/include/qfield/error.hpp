#pragma once

#include <stdexcept>
#include <string>

namespace qfield {

enum class ErrorCode {
  degenerate_domain,
  too_few_points,
  nonpositive_constant,
  zero_norm,
  nonpositive_sigma,
  invalid_argument,
  size_mismatch,
  boundary_scheme_mismatch,
  solver_breakdown,
  convergence_failure,
  unwrap_guard,
  dt_guard,
  too_few_snapshots,
  empty_selection,
  scenario_mismatch,
  parse_error,
  io_error,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::degenerate_domain: return "degenerate_domain";
    case ErrorCode::too_few_points: return "too_few_points";
    case ErrorCode::nonpositive_constant: return "nonpositive_constant";
    case ErrorCode::zero_norm: return "zero_norm";
    case ErrorCode::nonpositive_sigma: return "nonpositive_sigma";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::size_mismatch: return "size_mismatch";
    case ErrorCode::boundary_scheme_mismatch: return "boundary_scheme_mismatch";
    case ErrorCode::solver_breakdown: return "solver_breakdown";
    case ErrorCode::convergence_failure: return "convergence_failure";
    case ErrorCode::unwrap_guard: return "unwrap_guard";
    case ErrorCode::dt_guard: return "dt_guard";
    case ErrorCode::too_few_snapshots: return "too_few_snapshots";
    case ErrorCode::empty_selection: return "empty_selection";
    case ErrorCode::scenario_mismatch: return "scenario_mismatch";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_error: return "io_error";
  }
  return "unknown";
}

/// Every rejection in the library is an Error carrying a distinct code so
/// callers (and tests) can tell preconditions apart without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qfield
