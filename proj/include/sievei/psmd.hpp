#pragma once

#include <functional>
#include <optional>

#include "sievei/functionals.hpp"
#include "sievei/models.hpp"
#include "sievei/rng.hpp"

namespace sievei {

struct OptimConfig {
  int max_iters = 2000;
  int restarts = 5;
  double xtol = 1e-8;
  double ftol = 1e-10;
  std::uint64_t seed = 12345;
  double step0 = 0.25;  // initial simplex edge scale
  // Short NPQIV search chain for fits that refine a good warm start
  // (bootstrap replications): one small-bandwidth smoothed stage plus the
  // exact stage, with a smaller initial simplex.
  bool warm_refine = false;

  void validate() const {
    if (max_iters < 1 || restarts < 0 || xtol <= 0.0 || ftol <= 0.0 ||
        step0 <= 0.0)
      throw ConfigError("OptimConfig: positive tolerances required");
  }
};

enum class FitMethod { ClosedForm, Simplex };

struct FitResult {
  Vec beta;
  double qhat = 0.0;             // criterion at the optimum (unpenalized)
  double penalized_value = 0.0;  // qhat + lambda * Pen
  int iterations = 0;
  bool converged = false;
  FitMethod method = FitMethod::ClosedForm;
};

// Everything a fit needs, computed once per (spec, data): design matrices,
// the instrument projection, the penalty Gram, and the weighting. Reused by
// restricted fits, confidence-set inversion and bootstrap replications.
struct FitProblem {
  ModelSpec spec;
  Eigen::Index n = 0;
  Vec y1;
  Mat Q;   // n x k structural design
  ProjectionCache cache;
  Mat R;   // k x k penalty Gram
  SigmaHat sigma;
  Mat G;   // n x k projected structural design
  Vec m0;  // projected y1

  FitProblem(const ModelSpec& spec, const Dataset& data);

  // Recompute the projected quantities after edits to Q (test seam for
  // basis-reparametrization checks).
  void refresh();

  // Unpenalized criterion; omega, when given, multiplies the residuals
  // (generalized residual bootstrap).
  double criterion_at(const Vec& beta, const Vec* omega = nullptr) const;
  double penalty_at(const Vec& beta) const;
  double objective(const Vec& beta, const Vec* omega = nullptr) const;

  // NPQIV search aid: the objective with the indicator replaced by a normal
  // cdf at the given bandwidth. Smooth in beta; used as a continuation stage
  // before the exact criterion.
  double smoothed_objective(const Vec& beta, double bandwidth,
                            const Vec* omega = nullptr) const;
};

// Unrestricted PSMD: closed form for NPIV, Nelder-Mead with restarts around
// the NPIV closed-form initializer for NPQIV. `warm` adds an extra candidate
// start (bootstrap replications start from the original-sample optimum).
FitResult fit(const ModelSpec& spec, const Dataset& data,
              const OptimConfig& config);
FitResult fit_problem(const FitProblem& prob, const OptimConfig& config,
                      const Vec* omega = nullptr, const Vec* warm = nullptr);

// Restricted PSMD subject to phi(beta) = phi0. Linear functionals are
// eliminated exactly through a null-space reparametrization; nonlinear ones
// use quadratic-penalty continuation with c in {1e2, 1e4, 1e6} * n.
FitResult fit_restricted(const ModelSpec& spec, const Dataset& data,
                         const Functional& functional, double phi0,
                         const OptimConfig& config);
FitResult fit_restricted_problem(const FitProblem& prob,
                                 const Functional& functional, double phi0,
                                 const OptimConfig& config,
                                 const Vec* omega = nullptr,
                                 const Vec* warm = nullptr);

struct NelderMeadResult {
  Vec x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f,
                             const Vec& x0, const OptimConfig& config);

// The SQLR fit pair. The restricted fit is warm-started from the
// unrestricted optimum and the unrestricted fit is then re-polished from the
// restricted solution, so the two optimization errors are correlated and
// largely cancel in the criterion difference n(Q_R - Q_U).
struct SqlrFits {
  FitResult unrestricted;
  FitResult restricted;
  double statistic = 0.0;  // n (Q_R - Q_U), floored at 0
};

SqlrFits sqlr_fits(const FitProblem& prob, const Functional& functional,
                   double phi0, const OptimConfig& config,
                   const Vec* omega = nullptr, const Vec* warm = nullptr);

}  // namespace sievei
