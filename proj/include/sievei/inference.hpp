#pragma once

#include <optional>
#include <string>

#include "sievei/variance.hpp"

namespace sievei {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool unbounded_lo = false;
  bool unbounded_hi = false;
};

enum class InferenceMethod { Wald, SQLR, OptSQLR, Score };

struct InferenceReport {
  double statistic = 0.0;
  std::optional<double> variance;  // ||v*||^2_{n,sd} when applicable
  std::optional<double> pvalue;
  std::optional<Interval> ci;
  InferenceMethod method = InferenceMethod::Wald;
  int df = 1;
};

std::string method_name(InferenceMethod m);

// Sieve t: sqrt(n) (phi(beta) - phi0) / ||v*||_{n,sd}, two-sided normal
// p-value, CI at `level` when level > 0.
InferenceReport wald_test(const FitResult& fit, const Functional& functional,
                          const BasisSpec& qbasis, double phi0,
                          double variance_sq, Eigen::Index n,
                          double level = 0.95);

// SQLR = n (Qhat(restricted) - Qhat(unrestricted)), floored at 0. The chi^2_1
// p-value applies only under optimal weighting; otherwise it is omitted and
// bootstrap critical values should be used.
InferenceReport sqlr_test(const FitResult& fit_unrestricted,
                          const FitResult& fit_restricted, Eigen::Index n,
                          bool optimal);

// Smallest interval of r with QLR(r) <= crit, found by bracket expansion
// from phi(beta_hat) and bisection.
Interval invert_ci_with_crit(const FitProblem& prob, const FitResult& fit,
                             const Functional& functional, double crit,
                             const OptimConfig& config);

// Optimally weighted SQLR confidence set at `level` via the chi^2_1 quantile.
Interval invert_sqlr_ci(const ModelSpec& spec, const Dataset& data,
                        const FitResult& fit, const Functional& functional,
                        double level, const OptimConfig& config);

// Sieve score statistic from the restricted fit only (smooth residuals).
InferenceReport score_test(const ModelSpec& spec, const Dataset& data,
                           const FitResult& fit_restricted,
                           const Functional& functional,
                           const ProjectionCache& cache);

}  // namespace sievei
