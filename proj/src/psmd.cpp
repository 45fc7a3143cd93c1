#include "sievei/psmd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "sievei/prob.hpp"

namespace sievei {

namespace {

// Orthonormal basis of the null space of a nonzero row vector f' (k x (k-1)).
Mat null_space(const Vec& f) {
  const Eigen::Index k = f.size();
  Eigen::HouseholderQR<Mat> qr(f);
  const Mat full = qr.householderQ() * Mat::Identity(k, k);
  return full.rightCols(k - 1);
}

Vec solve_psd(const Mat& A, const Vec& b) {
  // Normal-equation solve through the pseudo-inverse; rank-safe for
  // near-collinear sieves.
  return pinv(A) * b;
}

struct RestrictedParam {
  // beta = base + N * delta; N empty when the constraint pins beta fully.
  Vec base;
  Mat N;
};

RestrictedParam linear_elimination(const Vec& grad, double phi0) {
  const double norm2 = grad.squaredNorm();
  if (norm2 <= 0.0)
    throw ConfigError("fit_restricted: zero functional gradient");
  RestrictedParam rp;
  rp.base = grad * (phi0 / norm2);
  if (grad.size() > 1) rp.N = null_space(grad);
  return rp;
}

}  // namespace

FitProblem::FitProblem(const ModelSpec& spec_in, const Dataset& data)
    : spec(spec_in),
      n(data.n),
      y1(data.y1),
      Q(structural_design(spec_in, data)),
      cache(instrument_design(spec_in, data)) {
  spec.validate();
  data.validate();
  if (spec.qbasis.dim > cache.J())
    std::fprintf(stderr,
                 "sievei: warning: sieve dim k=%d exceeds instrument dim J=%d\n",
                 spec.qbasis.dim, static_cast<int>(cache.J()));
  R = penalty_gram(spec.qbasis, std::max(spec.qbasis.dim, 32)).R;
  refresh();
  if (spec.weighting == WeightingRule::SeriesSigma0 &&
      spec.kind == ModelKind::NPIV) {
    // Pilot: identity-weighted closed form, then the series variance fit.
    sigma.constant = true;
    sigma.constant_value = 1.0;
    sigma.values = Vec::Constant(n, 1.0);
    OptimConfig pilot_cfg;
    const FitResult pilot = fit_problem(*this, pilot_cfg);
    const Vec u = residuals_from_fit(spec, y1, Q * pilot.beta);
    const double mean_u2 = u.array().square().mean();
    if (mean_u2 <= 0.0)
      throw NumericError("sigma0_series: all residuals are zero");
    const Vec u2 = u.array().square();
    sigma.values = cache.project(u2).array().max(1e-6 * mean_u2);
    sigma.constant = false;
  } else if (spec.weighting == WeightingRule::SeriesSigma0) {
    sigma.constant = true;
    sigma.constant_value = spec.gamma * (1.0 - spec.gamma);
    sigma.values = Vec::Constant(n, sigma.constant_value);
  } else {
    sigma.constant = true;
    sigma.constant_value = (spec.weighting == WeightingRule::KnownScalar)
                               ? spec.known_sigma_sq
                               : 1.0;
    sigma.values = Vec::Constant(n, sigma.constant_value);
  }
}

void FitProblem::refresh() {
  G = cache.project(Q);
  m0 = cache.project(y1);
}

double FitProblem::criterion_at(const Vec& beta, const Vec* omega) const {
  Vec rho = residuals_from_fit(spec, y1, Q * beta);
  if (omega) rho.array() *= omega->array();
  const auto nn = static_cast<double>(n);
  if (sigma.constant)
    return cache.half_projection(rho).squaredNorm() /
           (nn * sigma.constant_value);
  const Vec mh = cache.project(rho);
  return (mh.array().square() / sigma.values.array()).sum() / nn;
}

double FitProblem::penalty_at(const Vec& beta) const {
  return beta.dot(R * beta);
}

double FitProblem::objective(const Vec& beta, const Vec* omega) const {
  return criterion_at(beta, omega) + spec.lambda * penalty_at(beta);
}

double FitProblem::smoothed_objective(const Vec& beta, double bandwidth,
                                      const Vec* omega) const {
  const Vec h = Q * beta;
  Vec rho(n);
  // Integrated Epanechnikov kernel: C^1, monotone, cheap. The smoothing is
  // only a search surrogate; statistics always use the exact indicator.
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = (h(i) - y1(i)) / bandwidth;
    double s;
    if (t <= -1.0)
      s = 0.0;
    else if (t >= 1.0)
      s = 1.0;
    else
      s = 0.5 + t * (0.75 - 0.25 * t * t);
    rho(i) = s - spec.gamma;
  }
  if (omega) rho.array() *= omega->array();
  const auto nn = static_cast<double>(n);
  double crit;
  if (sigma.constant) {
    crit = cache.half_projection(rho).squaredNorm() /
           (nn * sigma.constant_value);
  } else {
    const Vec mh = cache.project(rho);
    crit = (mh.array().square() / sigma.values.array()).sum() / nn;
  }
  return crit + spec.lambda * penalty_at(beta);
}

NelderMeadResult nelder_mead(const std::function<double(const Vec&)>& f,
                             const Vec& x0, const OptimConfig& config) {
  const Eigen::Index k = x0.size();
  const Eigen::Index m = k + 1;
  Mat simplex(k, m);
  Vec fv(m);
  simplex.col(0) = x0;
  for (Eigen::Index j = 0; j < k; ++j) {
    simplex.col(j + 1) = x0;
    simplex(j, j + 1) += config.step0 * std::max(1.0, 0.4 * std::fabs(x0(j)));
  }
  for (Eigen::Index j = 0; j < m; ++j) fv(j) = f(simplex.col(j));

  NelderMeadResult res;
  int iter = 0;
  std::vector<Eigen::Index> order(m);
  for (; iter < config.max_iters; ++iter) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return fv(a) < fv(b); });
    const Eigen::Index best = order[0], worst = order[m - 1],
                       second = order[m - 2];

    double size = 0.0;
    for (Eigen::Index j = 0; j < m; ++j)
      size = std::max(size,
                      (simplex.col(j) - simplex.col(best)).lpNorm<Eigen::Infinity>());
    const double fspread = std::fabs(fv(worst) - fv(best));
    const double scale = 1.0 + simplex.col(best).norm();
    // A flat f-spread alone is not enough: piecewise-constant criteria are
    // flat on cells much larger than the resolution we need.
    if (size <= config.xtol * scale ||
        (fspread <= config.ftol * (std::fabs(fv(best)) + config.ftol) &&
         size <= 1e-3 * scale)) {
      res.converged = true;
      break;
    }

    Vec centroid = Vec::Zero(k);
    for (Eigen::Index j = 0; j < m; ++j)
      if (j != worst) centroid += simplex.col(j);
    centroid /= static_cast<double>(k);

    const Vec xr = centroid + (centroid - simplex.col(worst));
    const double fr = f(xr);
    if (fr < fv(best)) {
      const Vec xe = centroid + 2.0 * (centroid - simplex.col(worst));
      const double fe = f(xe);
      if (fe < fr) {
        simplex.col(worst) = xe;
        fv(worst) = fe;
      } else {
        simplex.col(worst) = xr;
        fv(worst) = fr;
      }
    } else if (fr < fv(second)) {
      simplex.col(worst) = xr;
      fv(worst) = fr;
    } else {
      const bool outside = fr < fv(worst);
      Vec xc;
      if (outside)
        xc = centroid + 0.5 * (xr - centroid);
      else
        xc = centroid + 0.5 * (simplex.col(worst) - centroid);
      const double fc = f(xc);
      if (fc < (outside ? fr : fv(worst))) {
        simplex.col(worst) = xc;
        fv(worst) = fc;
      } else {
        for (Eigen::Index j = 0; j < m; ++j) {
          if (j == best) continue;
          simplex.col(j) = simplex.col(best) + 0.5 * (simplex.col(j) - simplex.col(best));
          fv(j) = f(simplex.col(j));
        }
      }
    }
  }
  Eigen::Index best = 0;
  fv.minCoeff(&best);
  res.x = simplex.col(best);
  res.f = fv(best);
  res.iterations = iter;
  return res;
}

namespace {

// Multi-start simplex: one run from the initializer, `restarts` runs from
// random perturbations of it, and (when restarting) a final polish from the
// incumbent.
NelderMeadResult simplex_multistart(const std::function<double(const Vec&)>& f,
                                    const Vec& init, const OptimConfig& config) {
  RngStream rng(config.seed, 0x5150);
  NelderMeadResult best = nelder_mead(f, init, config);
  for (int r = 0; r < config.restarts; ++r) {
    Vec start = init;
    for (Eigen::Index j = 0; j < start.size(); ++j)
      start(j) += 0.25 * (1.0 + std::fabs(init(j))) * rng.normal();
    NelderMeadResult cand = nelder_mead(f, start, config);
    cand.iterations += best.iterations;
    if (cand.f < best.f) {
      cand.converged = cand.converged || best.converged;
      best = cand;
    } else {
      best.iterations = cand.iterations;
    }
  }
  if (config.restarts > 0) {
    NelderMeadResult polish = nelder_mead(f, best.x, config);
    polish.iterations += best.iterations;
    if (polish.f <= best.f) {
      polish.converged = polish.converged || best.converged;
      return polish;
    }
    best.iterations = polish.iterations;
  }
  return best;
}

// NPQIV search: the exact criterion is piecewise constant in beta, which
// strands a plain simplex in local cells. Run a bandwidth continuation on
// the smoothed criterion first (smooth, reliably optimizable), then a
// multi-start simplex on the exact objective from the smoothed solution.
// `to_beta` maps search coordinates to coefficients (identity for the
// unrestricted problem, the null-space parametrization for restricted fits).
NelderMeadResult npqiv_search(const FitProblem& prob,
                              const std::function<Vec(const Vec&)>& to_beta,
                              const std::vector<Vec>& starts,
                              const OptimConfig& config, const Vec* omega,
                              const std::function<double(const Vec&)>& extra =
                                  nullptr) {
  auto exact = [&](const Vec& z) {
    const Vec b = to_beta(z);
    return prob.objective(b, omega) + (extra ? extra(b) : 0.0);
  };

  Eigen::Index pick = 0;
  double fbest = exact(starts[0]);
  for (size_t c = 1; c < starts.size(); ++c) {
    const double fc = exact(starts[c]);
    if (fc < fbest) {
      fbest = fc;
      pick = static_cast<Eigen::Index>(c);
    }
  }
  Vec current = starts[static_cast<size_t>(pick)];

  // Bandwidth scale from the residuals at the incumbent.
  const Vec u = prob.y1 - prob.Q * to_beta(current);
  const double sd = std::sqrt((u.array() - u.mean()).square().sum() /
                              static_cast<double>(prob.n - 1));
  const double b0 = std::pow(static_cast<double>(prob.n), -0.2) *
                    std::max(sd, 1e-8);
  auto smooth_at = [&](double b) {
    return [&, b](const Vec& z) {
      const Vec bb = to_beta(z);
      return prob.smoothed_objective(bb, b, omega) + (extra ? extra(bb) : 0.0);
    };
  };
  int iterations = 0;
  OptimConfig single = config;
  single.restarts = 0;
  // The smoothed surrogates converge quickly; cap their iteration budget.
  OptimConfig smooth_cfg = single;
  smooth_cfg.max_iters = std::min(config.max_iters, 400);
  if (config.warm_refine) {
    NelderMeadResult nm =
        nelder_mead(smooth_at(0.04 * b0), current, smooth_cfg);
    current = nm.x;
    iterations += nm.iterations;
  } else {
    // Random restarts act on the widest-bandwidth surrogate, where they
    // probe basins rather than cell noise.
    OptimConfig multi = smooth_cfg;
    multi.restarts = config.restarts;
    NelderMeadResult nm0 = simplex_multistart(smooth_at(b0), current, multi);
    current = nm0.x;
    iterations += nm0.iterations;
    for (double b : {0.2 * b0, 0.04 * b0}) {
      NelderMeadResult nm = nelder_mead(smooth_at(b), current, smooth_cfg);
      current = nm.x;
      iterations += nm.iterations;
    }
  }

  // One symmetric exact-criterion refinement; no random exploration here, so
  // restricted and unrestricted fits share the same local resolution.
  NelderMeadResult nm = nelder_mead(exact, current, single);
  nm.iterations += iterations;
  if (fbest < nm.f) {
    nm.x = starts[static_cast<size_t>(pick)];
    nm.f = fbest;
  }
  return nm;
}

// Closed-form minimizer of the penalized weighted quadratic criterion over
// beta = base + N delta (N empty: unrestricted).
Vec npiv_solve(const FitProblem& prob, const Vec* omega, const Vec& base,
               const Mat* N) {
  const auto nn = static_cast<double>(prob.n);
  Mat G = prob.G;
  Vec m0 = prob.m0;
  if (omega) {
    const Mat Qw = prob.Q.array().colwise() * omega->array();
    const Vec yw = prob.y1.array() * omega->array();
    G = prob.cache.project(Qw);
    m0 = prob.cache.project(yw);
  }
  Vec w = prob.sigma.values.array().inverse();
  const Mat GW = G.transpose() * w.asDiagonal();
  const Mat A = GW * G / nn + prob.spec.lambda * prob.R;
  const Vec b = GW * m0 / nn;
  if (!N) return solve_psd(A, b);
  const Mat An = N->transpose() * A * (*N);
  const Vec bn = N->transpose() * (b - A * base);
  return base + (*N) * solve_psd(An, bn);
}

FitResult finish(const FitProblem& prob, const Vec& beta, int iterations,
                 bool converged, FitMethod method, const Vec* omega) {
  FitResult r;
  r.beta = beta;
  r.qhat = prob.criterion_at(beta, omega);
  r.penalized_value = r.qhat + prob.spec.lambda * prob.penalty_at(beta);
  r.iterations = iterations;
  r.converged = converged;
  r.method = method;
  return r;
}

}  // namespace

FitResult fit_problem(const FitProblem& prob, const OptimConfig& config,
                      const Vec* omega, const Vec* warm) {
  config.validate();
  const Vec init = npiv_solve(prob, omega, Vec(), nullptr);
  if (prob.spec.kind == ModelKind::NPIV)
    return finish(prob, init, 1, true, FitMethod::ClosedForm, omega);
  std::vector<Vec> starts{init};
  if (warm) starts.push_back(*warm);
  auto identity = [](const Vec& z) { return z; };
  const NelderMeadResult nm =
      npqiv_search(prob, identity, starts, config, omega);
  return finish(prob, nm.x, nm.iterations, nm.converged, FitMethod::Simplex,
                omega);
}

FitResult fit_restricted_problem(const FitProblem& prob,
                                 const Functional& functional, double phi0,
                                 const OptimConfig& config, const Vec* omega,
                                 const Vec* warm) {
  config.validate();
  const auto& basis = prob.spec.qbasis;
  if (functional.is_linear()) {
    const Vec grad = gradient(functional, basis, Vec::Zero(basis.dim));
    const RestrictedParam rp = linear_elimination(grad, phi0);
    if (rp.N.size() == 0)  // k == 1: the constraint pins beta
      return finish(prob, rp.base, 1, true, FitMethod::ClosedForm, omega);
    const Vec beta_quad = npiv_solve(prob, omega, rp.base, &rp.N);
    if (prob.spec.kind == ModelKind::NPIV)
      return finish(prob, beta_quad, 1, true, FitMethod::ClosedForm, omega);
    // NPQIV: simplex over the null-space coordinates, warm-started from the
    // restricted quadratic solution (and the feasible projection of `warm`).
    auto to_beta = [&](const Vec& d) -> Vec { return rp.base + rp.N * d; };
    std::vector<Vec> starts{rp.N.transpose() * (beta_quad - rp.base)};
    if (warm) starts.push_back(rp.N.transpose() * (*warm - rp.base));
    const NelderMeadResult nm =
        npqiv_search(prob, to_beta, starts, config, omega);
    const Vec beta = to_beta(nm.x);
    return finish(prob, beta, nm.iterations, nm.converged, FitMethod::Simplex,
                  omega);
  }

  // Nonlinear constraint: quadratic-penalty continuation from the
  // unrestricted optimum (or the supplied warm start).
  Vec beta;
  int iterations = 0;
  if (warm) {
    beta = *warm;
  } else {
    const FitResult unres = fit_problem(prob, config, omega);
    beta = unres.beta;
    iterations = unres.iterations;
  }
  bool converged = false;
  const double scale = static_cast<double>(prob.n);
  auto identity = [](const Vec& z) { return z; };
  for (double c : {1e2 * scale, 1e4 * scale, 1e6 * scale}) {
    auto constraint = [&](const Vec& b) {
      const double gap = value(functional, basis, b) - phi0;
      return c * gap * gap;
    };
    NelderMeadResult nm;
    if (prob.spec.kind == ModelKind::NPQIV) {
      nm = npqiv_search(prob, identity, {beta}, config, omega, constraint);
    } else {
      auto f = [&](const Vec& b) {
        return prob.objective(b, omega) + constraint(b);
      };
      nm = simplex_multistart(f, beta, config);
    }
    beta = nm.x;
    iterations += nm.iterations;
    converged = nm.converged;
  }
  const double gap = std::fabs(value(functional, basis, beta) - phi0);
  if (gap > 1e-6 * (1.0 + std::fabs(phi0))) throw RestrictedFitError(gap);
  return finish(prob, beta, iterations, converged, FitMethod::Simplex, omega);
}

FitResult fit_restricted(const ModelSpec& spec, const Dataset& data,
                         const Functional& functional, double phi0,
                         const OptimConfig& config) {
  FitProblem prob(spec, data);
  return fit_restricted_problem(prob, functional, phi0, config);
}

FitResult fit(const ModelSpec& spec, const Dataset& data,
              const OptimConfig& config) {
  FitProblem prob(spec, data);
  return fit_problem(prob, config);
}

SqlrFits sqlr_fits(const FitProblem& prob, const Functional& functional,
                   double phi0, const OptimConfig& config, const Vec* omega,
                   const Vec* warm) {
  SqlrFits out;
  out.unrestricted = fit_problem(prob, config, omega, warm);
  out.restricted = fit_restricted_problem(prob, functional, phi0, config,
                                          omega, &out.unrestricted.beta);
  if (prob.spec.kind == ModelKind::NPQIV) {
    // Re-polish the unrestricted fit from the restricted solution; both
    // sides then share the same local search resolution.
    OptimConfig polish = config;
    polish.restarts = 0;
    auto exact = [&](const Vec& b) { return prob.objective(b, omega); };
    const NelderMeadResult again =
        nelder_mead(exact, out.restricted.beta, polish);
    if (again.f < out.unrestricted.penalized_value) {
      out.unrestricted.beta = again.x;
      out.unrestricted.qhat = prob.criterion_at(again.x, omega);
      out.unrestricted.penalized_value = again.f;
    }
  }
  out.statistic =
      std::max(0.0, static_cast<double>(prob.n) *
                        (out.restricted.qhat - out.unrestricted.qhat));
  return out;
}

}  // namespace sievei
