#pragma once

#include <optional>

#include "sievei/basis.hpp"
#include "sievei/data_io.hpp"
#include "sievei/linalg.hpp"

namespace sievei {

enum class ModelKind { NPIV, NPQIV };

enum class WeightingRule { Identity, KnownScalar, SeriesSigma0 };

// Residual model: NPIV rho = y1 - h(y2); NPQIV rho = 1{y1 <= h(y2)} - gamma.
struct ModelSpec {
  ModelKind kind = ModelKind::NPIV;
  double gamma = 0.5;  // NPQIV quantile, in (0,1)
  BasisSpec qbasis;    // sieve for h
  BasisSpec pbasis;    // instrument sieve
  double lambda = 0.0; // penalty weight, >= 0
  WeightingRule weighting = WeightingRule::Identity;
  double known_sigma_sq = 1.0;      // for KnownScalar
  bool tensor_x = false;            // tensor-product instruments when d_x > 1
  bool numeric_derivative = false;  // NPQIV smoothed-indicator derivative

  void validate() const;
};

// Per-observation weighting values Sigma_hat(X_i) > 0.
struct SigmaHat {
  Vec values;
  bool constant = false;
  double constant_value = 1.0;
};

// Instrument design matrix p^J evaluated at the sample; first column of x
// unless tensor_x is set (then a row-wise tensor product across columns).
Mat instrument_design(const ModelSpec& spec, const Dataset& data);

Mat structural_design(const ModelSpec& spec, const Dataset& data);

// rho_i(beta); NPIV: y1_i - q(y2_i)'beta; NPQIV: 1{y1_i <= q(y2_i)'beta} - gamma.
Vec residuals(const ModelSpec& spec, const Dataset& data, const Vec& beta);

// Residuals from a precomputed fitted vector h_i = q(y2_i)'beta.
Vec residuals_from_fit(const ModelSpec& spec, const Vec& y1, const Vec& hfit);

// Series LS estimate of E[rho | X], evaluated at the sample points, or at
// eval_x when provided.
Vec m_hat(const ModelSpec& spec, const Dataset& data, const Vec& beta,
          const ProjectionCache& cache,
          const std::optional<Vec>& eval_x = std::nullopt);

// Sample criterion Qhat_n = n^-1 sum_i mhat(X_i)^2 / Sigma_hat(X_i). For a
// constant weighting this is the projection quadratic form rho'P(P'P)^-P'rho
// scaled by (n c)^-1.
double criterion(const ModelSpec& spec, const Dataset& data, const Vec& beta,
                 const ProjectionCache& cache, const SigmaHat& sigma);

// n x k matrix with row i = d mhat(X_i)/d alpha [q^k]'. For NPIV this is the
// projection of the structural design onto the instrument space and does not
// depend on beta. NPQIV requires the numeric-derivative flag.
Mat dmhat_matrix(const ModelSpec& spec, const Dataset& data, const Vec& beta,
                 const ProjectionCache& cache);

// Same, from precomputed pieces (avoids rebuilding the design).
Mat dmhat_from_parts(const ModelSpec& spec, const Vec& y1, const Mat& Q,
                     const Vec& beta, const ProjectionCache& cache);

// Series LS estimate of Sigma_0(X_i) = Var(rho|X_i), clamped below at
// floor (default 1e-6 * mean(rho^2)). NPQIV: the exact constant gamma(1-gamma).
SigmaHat sigma0_series(const ModelSpec& spec, const Dataset& data,
                       const Vec& beta, const ProjectionCache& cache,
                       double floor = -1.0);

// Weighting values implied by spec.weighting (SeriesSigma0 uses beta as the
// pilot estimate).
SigmaHat make_sigma(const ModelSpec& spec, const Dataset& data, const Vec& beta,
                    const ProjectionCache& cache);

}  // namespace sievei
