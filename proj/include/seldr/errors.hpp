#pragma once

#include <stdexcept>
#include <string>

namespace seldr {

// Error categories surfaced by the library. Warnings (separation, ridge
// regularization, band truncation) are reported through diagnostic flags on
// the result objects instead of exceptions.
enum class errc {
  domain,                 // argument outside the mathematical domain
  singular_correlation,   // |rho| = 1 where a density or derivative is needed
  degenerate_cell,        // a cell probability collapsed to 0 or its upper bound
  infeasible_probability, // joint probability outside the Frechet bounds
  degenerate_marginal,    // marginal probability at 0 or 1
  malformed_input,        // input violates a documented invariant
  numeric_failure,        // iterative solver failed to converge
  wrong_case,             // boundary-case input passed to the interior solver
  singular_design,        // rank-deficient design matrix
  degenerate_threshold,   // all selected indicators equal at a threshold
  schema,                 // column layouts do not match
  empty_sample,           // empty input sample
  no_variation,           // all standard errors are zero
  contract,               // caller violated an operation precondition
  parse,                  // malformed file content
};

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void throw_error(errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace seldr
