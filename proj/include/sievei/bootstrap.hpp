#pragma once

#include "sievei/inference.hpp"

namespace sievei {

// Bootstrap weight law: nonnegative, mean one. Ones is a degenerate scheme
// collapsing every bootstrap statistic to zero (identity checks).
struct WeightScheme {
  enum class Kind { IIDExponential, Multinomial, Ones } kind =
      Kind::IIDExponential;
  double sigma_omega_sq = 1.0;
};

struct BootstrapRun {
  int B = 0;
  std::vector<double> stats;  // length B; failed replications are NaN
  int failures = 0;
  std::uint64_t seed = 0;

  // Empirical (1-tau) quantile over the non-missing statistics.
  double critical_value(double level) const;
  // Share of non-missing statistics >= observed.
  double pvalue_of(double observed) const;
};

Vec gen_weights(const WeightScheme& scheme, Eigen::Index n, RngStream& rng);

// Bootstrap criterion: the criterion pipeline with rho_i replaced by
// omega_i rho_i.
double bootstrap_criterion(const ModelSpec& spec, const Dataset& data,
                           const Vec& beta, const ProjectionCache& cache,
                           const SigmaHat& sigma, const Vec& weights);

// Per replication: draw weights, refit unrestricted and restricted at
// phi_hat = phi(fit), and record n (QhatB(restr) - QhatB(unrestr)) / sigma_w^2.
BootstrapRun bootstrap_sqlr(const FitProblem& prob, const FitResult& fit,
                            const Functional& functional,
                            const WeightScheme& scheme, int B,
                            const OptimConfig& config, int threads = 0);

enum class BootWaldFlavor { W1, W2 };

// Bootstrap sieve variance ||v*||^2_{B,sd} for one weight draw: the plug-in
// variance with (omega_i - 1)^2 rho_i^2 in the middle matrix. Its mean over
// weight draws is sigma_omega^2 ||v*||^2_{n,sd}.
double bootstrap_sieve_variance(const FitProblem& prob, const FitResult& fit,
                                const Functional& functional,
                                const Vec& omega);

// W1: sqrt(n)(phi(alphaB) - phi_hat) / (sigma_w ||v*||_{n,sd}).
// W2: same numerator over the per-replication bootstrap sieve deviation
//     ||v*||_{B,sd} built from (omega_i - 1)^2 rho_i^2.
BootstrapRun bootstrap_wald(const FitProblem& prob, const FitResult& fit,
                            const Functional& functional, double variance_sq,
                            const WeightScheme& scheme, int B,
                            const OptimConfig& config, BootWaldFlavor flavor,
                            int threads = 0);

// Bootstrap sieve score: uses only the restricted fit, no refitting.
BootstrapRun bootstrap_score(const ModelSpec& spec, const Dataset& data,
                             const FitResult& fit_restricted,
                             const Functional& functional,
                             const ProjectionCache& cache,
                             const WeightScheme& scheme, int B,
                             std::uint64_t seed);

// {r : QLR(r) <= bootstrap critical value} via the same bracket/bisection as
// invert_sqlr_ci.
Interval bootstrap_ci(const FitProblem& prob, const FitResult& fit,
                      const Functional& functional, const BootstrapRun& run,
                      double level, const OptimConfig& config);

}  // namespace sievei
