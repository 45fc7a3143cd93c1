#pragma once

#include <stdexcept>
#include <string>

namespace sievei {

// Configuration / input problems: bad schema, bad flags, dimension mismatch.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Data file problems; carries the offending 1-based row when known.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg, long row = -1)
      : std::runtime_error(row >= 0 ? msg + " (row " + std::to_string(row) + ")" : msg),
        row(row) {}
  long row;
};

// Numerical failures: degenerate variance, degenerate knots, slope gap <= 0.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested an analytic residual derivative for a model whose residual is
// not pointwise smooth (NPQIV). Use SQLR or slope-variance inference instead.
struct NonSmoothResidualError : std::runtime_error {
  NonSmoothResidualError()
      : std::runtime_error(
            "residual is not pointwise smooth in the parameters; analytic "
            "derivative unavailable (use SQLR or slope-variance inference, "
            "or enable the numeric-derivative flag)") {}
};

// Restricted fit could not satisfy the constraint within tolerance.
struct RestrictedFitError : std::runtime_error {
  explicit RestrictedFitError(double achieved_gap)
      : std::runtime_error("restricted fit infeasible: |phi - phi0| = " +
                           std::to_string(achieved_gap)),
        achieved_gap(achieved_gap) {}
  double achieved_gap;
};

// More than the tolerated share of bootstrap replications failed.
struct BootstrapUnstableError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sievei
