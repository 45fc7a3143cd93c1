#include "sievei/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "sievei/parallel.hpp"
#include "sievei/prob.hpp"

namespace sievei {

namespace {

std::vector<double> valid_stats(const BootstrapRun& run) {
  std::vector<double> v;
  v.reserve(run.stats.size());
  for (double s : run.stats)
    if (std::isfinite(s)) v.push_back(s);
  if (v.empty()) throw NumericError("bootstrap: no successful replications");
  return v;
}

void check_failures(BootstrapRun& run) {
  if (run.failures * 10 > run.B)
    throw BootstrapUnstableError(
        "bootstrap: more than 10% of replications failed (" +
        std::to_string(run.failures) + "/" + std::to_string(run.B) + ")");
}

}  // namespace

double BootstrapRun::critical_value(double level) const {
  auto v = valid_stats(*this);
  std::sort(v.begin(), v.end());
  return empirical_quantile(v, level);
}

double BootstrapRun::pvalue_of(double observed) const {
  const auto v = valid_stats(*this);
  long count = 0;
  for (double s : v)
    if (s >= observed) ++count;
  return static_cast<double>(count) / static_cast<double>(v.size());
}

Vec gen_weights(const WeightScheme& scheme, Eigen::Index n, RngStream& rng) {
  Vec w(n);
  switch (scheme.kind) {
    case WeightScheme::Kind::IIDExponential:
      for (Eigen::Index i = 0; i < n; ++i) w(i) = rng.exponential();
      return w;
    case WeightScheme::Kind::Multinomial: {
      w.setZero();
      for (Eigen::Index i = 0; i < n; ++i)
        w(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)))) +=
            1.0;
      return w;
    }
    case WeightScheme::Kind::Ones:
      return Vec::Constant(n, 1.0);
  }
  throw ConfigError("gen_weights: unknown scheme");
}

double bootstrap_criterion(const ModelSpec& spec, const Dataset& data,
                           const Vec& beta, const ProjectionCache& cache,
                           const SigmaHat& sigma, const Vec& weights) {
  if (weights.size() != data.n)
    throw ConfigError("bootstrap_criterion: weight length mismatch");
  Vec rho = residuals(spec, data, beta);
  rho.array() *= weights.array();
  const auto n = static_cast<double>(data.n);
  if (sigma.constant)
    return projection_quadform(cache, rho) / (n * sigma.constant_value);
  const Vec mh = cache.project(rho);
  return (mh.array().square() / sigma.values.array()).sum() / n;
}

BootstrapRun bootstrap_sqlr(const FitProblem& prob, const FitResult& fit,
                            const Functional& functional,
                            const WeightScheme& scheme, int B,
                            const OptimConfig& config, int threads) {
  const double phi_hat = value(functional, prob.spec.qbasis, fit.beta);
  BootstrapRun run;
  run.B = B;
  run.seed = config.seed;
  if (scheme.kind == WeightScheme::Kind::Ones) {
    // Degenerate weights: QhatB == Qhat and the restriction at phi_hat is
    // non-binding at the optimum, so every statistic is zero.
    run.stats.assign(static_cast<size_t>(B), 0.0);
    return run;
  }
  run.stats.assign(static_cast<size_t>(B),
                   std::numeric_limits<double>::quiet_NaN());
  std::atomic<int> failures{0};
  parallel_for(B, threads, [&](long b) {
    RngStream rng(config.seed, boot_stream_id(0, static_cast<std::uint64_t>(b)));
    const Vec omega = gen_weights(scheme, prob.n, rng);
    OptimConfig cfg = config;
    cfg.seed = config.seed ^ (0xB007ull + static_cast<std::uint64_t>(b));
    try {
      const SqlrFits fits =
          sqlr_fits(prob, functional, phi_hat, cfg, &omega, &fit.beta);
      run.stats[static_cast<size_t>(b)] =
          fits.statistic / scheme.sigma_omega_sq;
    } catch (const std::exception&) {
      failures.fetch_add(1);
    }
  });
  run.failures = failures.load();
  check_failures(run);
  return run;
}

namespace {

// Per-observation score contributions (gamma*' d_i) rho_i / Sigma_i of the
// original sample; the W2 bootstrap variance averages their squares against
// (omega_i - 1)^2.
Vec w2_contributions(const FitProblem& prob, const FitResult& fit,
                     const Functional& functional) {
  const Vec rho_hat =
      residuals_from_fit(prob.spec, prob.y1, prob.Q * fit.beta);
  const Mat dmhat =
      dmhat_from_parts(prob.spec, prob.y1, prob.Q, fit.beta, prob.cache);
  const Mat D = d_matrix(dmhat, prob.sigma);
  const Vec F = gradient(functional, prob.spec.qbasis, fit.beta);
  const Vec gamma = pinv(D) * F;
  return (dmhat * gamma).array() * rho_hat.array() /
         prob.sigma.values.array();
}

}  // namespace

double bootstrap_sieve_variance(const FitProblem& prob, const FitResult& fit,
                                const Functional& functional,
                                const Vec& omega) {
  const Vec dvec = w2_contributions(prob, fit, functional);
  return (omega.array() - 1.0)
             .square()
             .matrix()
             .dot(dvec.array().square().matrix()) /
         static_cast<double>(prob.n);
}

BootstrapRun bootstrap_wald(const FitProblem& prob, const FitResult& fit,
                            const Functional& functional, double variance_sq,
                            const WeightScheme& scheme, int B,
                            const OptimConfig& config, BootWaldFlavor flavor,
                            int threads) {
  if (!(variance_sq > 0.0))
    throw NumericError("bootstrap_wald: nonpositive variance");
  const double phi_hat = value(functional, prob.spec.qbasis, fit.beta);
  const double sqrt_n = std::sqrt(static_cast<double>(prob.n));
  const double sigma_w = std::sqrt(scheme.sigma_omega_sq);

  // W2 reuses the original-sample residuals and projected derivative.
  Vec dvec;
  if (flavor == BootWaldFlavor::W2)
    dvec = w2_contributions(prob, fit, functional);

  BootstrapRun run;
  run.B = B;
  run.seed = config.seed;
  if (scheme.kind == WeightScheme::Kind::Ones) {
    run.stats.assign(static_cast<size_t>(B), 0.0);
    return run;
  }
  run.stats.assign(static_cast<size_t>(B),
                   std::numeric_limits<double>::quiet_NaN());
  std::atomic<int> failures{0};
  parallel_for(B, threads, [&](long b) {
    RngStream rng(config.seed, boot_stream_id(0, static_cast<std::uint64_t>(b)));
    const Vec omega = gen_weights(scheme, prob.n, rng);
    OptimConfig cfg = config;
    cfg.seed = config.seed ^ (0xB007ull + static_cast<std::uint64_t>(b));
    try {
      const FitResult unres = fit_problem(prob, cfg, &omega, &fit.beta);
      const double phi_b = value(functional, prob.spec.qbasis, unres.beta);
      double denom;
      if (flavor == BootWaldFlavor::W1) {
        denom = sigma_w * std::sqrt(variance_sq);
      } else {
        const double var_b =
            (omega.array() - 1.0).square().matrix().dot(
                dvec.array().square().matrix()) /
            static_cast<double>(prob.n);
        denom = std::sqrt(var_b);
      }
      if (!(denom > 0.0)) throw NumericError("bootstrap_wald: zero denominator");
      run.stats[static_cast<size_t>(b)] = sqrt_n * (phi_b - phi_hat) / denom;
    } catch (const std::exception&) {
      failures.fetch_add(1);
    }
  });
  run.failures = failures.load();
  check_failures(run);
  return run;
}

BootstrapRun bootstrap_score(const ModelSpec& spec, const Dataset& data,
                             const FitResult& fit_restricted,
                             const Functional& functional,
                             const ProjectionCache& cache,
                             const WeightScheme& scheme, int B,
                             std::uint64_t seed) {
  const Vec beta = fit_restricted.beta;
  const Mat dmhat = dmhat_matrix(spec, data, beta, cache);
  const SigmaHat sigma = make_sigma(spec, data, beta, cache);
  const Vec rho = residuals(spec, data, beta);
  const Mat D = d_matrix(dmhat, sigma);
  const Vec F = gradient(functional, spec.qbasis, beta);
  const Mat ups = upsilon_matrix(dmhat, sigma, rho);
  const RieszSolution riesz = riesz_solve(D, F);
  const double var_sd = riesz.gamma_star.dot(ups * riesz.gamma_star);
  if (!(var_sd > 0.0))
    throw NumericError("bootstrap_score: degenerate restricted variance");
  // g_i = (gamma*' d_i) / Sigma_i / ||v*||_{n,sd}; statistic is
  // n^{-1/2} sum_i g_i (omega_i - 1) rho_i.
  const Vec g = ((dmhat * riesz.gamma_star).array() / sigma.values.array()) /
                std::sqrt(var_sd);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(data.n));

  BootstrapRun run;
  run.B = B;
  run.seed = seed;
  run.stats.resize(static_cast<size_t>(B));
  for (int b = 0; b < B; ++b) {
    RngStream rng(seed, boot_stream_id(0, static_cast<std::uint64_t>(b)));
    const Vec omega = gen_weights(scheme, data.n, rng);
    run.stats[static_cast<size_t>(b)] =
        inv_sqrt_n *
        (g.array() * (omega.array() - 1.0) * rho.array()).sum();
  }
  return run;
}

Interval bootstrap_ci(const FitProblem& prob, const FitResult& fit,
                      const Functional& functional, const BootstrapRun& run,
                      double level, const OptimConfig& config) {
  return invert_ci_with_crit(prob, fit, functional, run.critical_value(level),
                             config);
}

}  // namespace sievei
