#pragma once

#include "sievei/psmd.hpp"

namespace sievei {

// Empirical sieve Riesz representer gamma* = D^- F and its induced norm.
struct RieszSolution {
  Vec gamma_star;
  Mat D;
  Vec F;
  double norm_sq = 0.0;  // gamma*' D gamma* = F' D^- F
};

// D_hat = n^-1 sum_i d_i d_i' / Sigma_i, rows d_i' of dmhat.
Mat d_matrix(const Mat& dmhat, const SigmaHat& sigma);

// Upsilon_hat (V1 middle): n^-1 sum_i d_i (rho_i^2 / Sigma_i^2) d_i'.
Mat upsilon_matrix(const Mat& dmhat, const SigmaHat& sigma, const Vec& rho_hat);

// Omega_hat (V2 middle): n^-1 sum_i d_i (Sigma0_i / Sigma_i^2) d_i'.
Mat omega_matrix(const Mat& dmhat, const SigmaHat& sigma,
                 const SigmaHat& sigma0);

RieszSolution riesz_solve(const Mat& D, const Vec& F);

// F' D^- middle D^- F >= 0: the plug-in sieve variance of sqrt(n) phi_hat.
double variance_plugin(const Mat& D, const Mat& middle, const Vec& F);

// Criterion-slope variance estimator for an optimally weighted PSMD fit:
// eps^2 / (Qhat(restricted at phi_hat - eps) - Qhat(fit)). Valid for
// non-smooth residuals (NPQIV). eps <= 0 selects the default
// 4 n^{-1/2} * max(1, |phi_hat|).
double slope_variance(const ModelSpec& spec, const Dataset& data,
                      const FitResult& fit, const Functional& functional,
                      double eps, const OptimConfig& config);

double slope_variance_problem(const FitProblem& prob, const FitResult& fit,
                              const Functional& functional, double eps,
                              const OptimConfig& config);

}  // namespace sievei
