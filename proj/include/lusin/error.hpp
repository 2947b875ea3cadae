#pragma once

#include <stdexcept>
#include <string>

namespace lusin {

/// Failure categories. The CLI maps each to a distinct exit code.
enum class ErrorKind {
  invalid_argument,
  empty_domain,
  kernel_under_resolved,
  sigma_too_large,
  grid_too_coarse,
  refine_ambient_grid,
  oscillation_unmet,
  inner_accuracy_not_met,
  not_a_graph,
  atlas_coverage,
  budget_failure,
  config_error,
  io_error,
  fingerprint_mismatch,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace lusin
