#include <doctest.h>

#include <cmath>
#include <random>

#include "sievei/bootstrap.hpp"
#include "sievei/mc.hpp"
#include "sievei/prob.hpp"

using namespace sievei;

namespace {

Dataset small_data(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> nd;
  Dataset d;
  d.n = n;
  d.y1.resize(n);
  d.y2.resize(n);
  d.x.resize(n, 1);
  for (int i = 0; i < n; ++i) {
    d.x(i, 0) = nd(gen);
    d.y2(i) = 0.7 * d.x(i, 0) + 0.4 * nd(gen);
    d.y1(i) = 0.5 + d.y2(i) + 0.4 * nd(gen);
  }
  return d;
}

ModelSpec npiv_spec(const Dataset& d, int k, int J, double lambda = 0.0) {
  ModelSpec spec;
  spec.kind = ModelKind::NPIV;
  spec.qbasis = make_power_series(k, d.y2.minCoeff() - 1e-9,
                                  d.y2.maxCoeff() + 1e-9);
  spec.pbasis = make_power_series(J, d.x.col(0).minCoeff() - 1e-9,
                                  d.x.col(0).maxCoeff() + 1e-9);
  spec.lambda = lambda;
  return spec;
}

Functional point_eval(double y) {
  Functional f;
  f.kind = FunctionalKind::PointEval;
  f.ybar = y;
  return f;
}

}  // namespace

TEST_CASE("multinomial weights sum to n on every draw") {
  WeightScheme ws;
  ws.kind = WeightScheme::Kind::Multinomial;
  RngStream rng(9, 0);
  for (int t = 0; t < 50; ++t) {
    const Vec w = gen_weights(ws, 37, rng);
    CHECK(w.sum() == doctest::Approx(37.0).epsilon(1e-14));
    CHECK(w.minCoeff() >= 0.0);
  }
}

TEST_CASE("iid exponential weights match their first two moments") {
  WeightScheme ws;
  ws.kind = WeightScheme::Kind::IIDExponential;
  RngStream rng(11, 0);
  const Eigen::Index n = 1000000;
  const Vec w = gen_weights(ws, n, rng);
  CHECK(w.minCoeff() >= 0.0);
  CHECK(w.mean() == doctest::Approx(1.0).epsilon(0.005));
  const double var =
      (w.array() - w.mean()).square().sum() / static_cast<double>(n - 1);
  CHECK(var == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("multinomial weight variance approaches 1 - 1/n") {
  WeightScheme ws;
  ws.kind = WeightScheme::Kind::Multinomial;
  RngStream rng(13, 0);
  const int draws = 4000;
  const Eigen::Index n = 50;
  double sum = 0.0, sum2 = 0.0;
  for (int t = 0; t < draws; ++t) {
    const Vec w = gen_weights(ws, n, rng);
    sum += w(0);
    sum2 += w(0) * w(0);
  }
  const double mean = sum / draws;
  const double var = sum2 / draws - mean * mean;
  const double target = 1.0 - 1.0 / static_cast<double>(n);
  // MC standard error of the variance estimate ~ sqrt(Var((w-1)^2)/draws)
  const double se = std::sqrt(3.0 / draws);
  CHECK(std::fabs(var - target) < 3.0 * se);
}

TEST_CASE("degenerate ones weights are accepted") {
  WeightScheme ws;
  ws.kind = WeightScheme::Kind::Ones;
  RngStream rng(15, 0);
  const Vec w = gen_weights(ws, 10, rng);
  CHECK((w.array() == 1.0).all());
}

TEST_CASE("bootstrap criterion identities") {
  const Dataset d = small_data(20, 1);
  const ModelSpec spec = npiv_spec(d, 2, 3);
  ProjectionCache cache(instrument_design(spec, d));
  SigmaHat sig;
  sig.constant = true;
  sig.constant_value = 1.0;
  sig.values = Vec::Constant(20, 1.0);
  Vec beta(2);
  beta << 0.2, 0.8;
  const double q = criterion(spec, d, beta, cache, sig);

  // omega == 1 reproduces the criterion exactly
  CHECK(bootstrap_criterion(spec, d, beta, cache, sig, Vec::Constant(20, 1.0)) ==
        q);
  // omega == 2: quadratic homogeneity
  CHECK(bootstrap_criterion(spec, d, beta, cache, sig, Vec::Constant(20, 2.0)) ==
        doctest::Approx(4.0 * q).epsilon(1e-12));

  // random weights: direct-loop oracle
  RngStream rng(3, 0);
  Vec omega(20);
  for (int i = 0; i < 20; ++i) omega(i) = rng.exponential();
  const double qb = bootstrap_criterion(spec, d, beta, cache, sig, omega);
  Vec rho = residuals(spec, d, beta);
  rho.array() *= omega.array();
  const Vec coef = cache.ls_coefficients(rho);
  const Vec mhat = instrument_design(spec, d) * coef;
  CHECK(qb == doctest::Approx(mhat.squaredNorm() / 20.0).epsilon(1e-10));
}

TEST_CASE("degenerate weights collapse bootstrap statistics to exact zeros") {
  const Dataset d = small_data(40, 2);
  const ModelSpec spec = npiv_spec(d, 2, 4, 1e-5);
  FitProblem prob(spec, d);
  OptimConfig oc;
  const FitResult fr = fit_problem(prob, oc);
  const Functional f = point_eval(0.0);
  WeightScheme ones;
  ones.kind = WeightScheme::Kind::Ones;

  const BootstrapRun sqlr_run = bootstrap_sqlr(prob, fr, f, ones, 25, oc);
  for (double s : sqlr_run.stats) CHECK(s == 0.0);

  const BootstrapRun wald_run = bootstrap_wald(
      prob, fr, f, 1.0, ones, 25, oc, BootWaldFlavor::W1);
  for (double s : wald_run.stats) CHECK(s == 0.0);

  const BootstrapRun score_run =
      bootstrap_score(spec, d, fr, f, prob.cache, ones, 25, 7);
  for (double s : score_run.stats) CHECK(s == 0.0);
}

TEST_CASE("bootstrap runs are deterministic: seed fixed, workers vary") {
  const Dataset d = small_data(30, 3);
  const ModelSpec spec = npiv_spec(d, 2, 4, 1e-5);
  FitProblem prob(spec, d);
  OptimConfig oc;
  oc.seed = 99;
  const FitResult fr = fit_problem(prob, oc);
  const Functional f = point_eval(0.0);
  WeightScheme ws;
  ws.kind = WeightScheme::Kind::Multinomial;
  const BootstrapRun a = bootstrap_sqlr(prob, fr, f, ws, 30, oc, 1);
  const BootstrapRun b = bootstrap_sqlr(prob, fr, f, ws, 30, oc, 2);
  REQUIRE(a.stats.size() == b.stats.size());
  for (size_t i = 0; i < a.stats.size(); ++i) CHECK(a.stats[i] == b.stats[i]);
}

TEST_CASE("bootstrap sieve variance satisfies the conditional-mean identity") {
  const Dataset d = small_data(200, 4);
  const ModelSpec spec = npiv_spec(d, 3, 5, 1e-6);
  FitProblem prob(spec, d);
  OptimConfig oc;
  const FitResult fr = fit_problem(prob, oc);
  const Functional f = point_eval(0.0);

  const Vec rho = residuals_from_fit(spec, prob.y1, prob.Q * fr.beta);
  const Mat dmhat = dmhat_from_parts(spec, prob.y1, prob.Q, fr.beta, prob.cache);
  const Mat D = d_matrix(dmhat, prob.sigma);
  const Vec F = gradient(f, spec.qbasis, fr.beta);
  const double v1 = variance_plugin(D, upsilon_matrix(dmhat, prob.sigma, rho), F);

  WeightScheme ws;
  ws.kind = WeightScheme::Kind::IIDExponential;
  RngStream rng(21, 0);
  const int draws = 10000;
  double acc = 0.0;
  for (int b = 0; b < draws; ++b) {
    const Vec omega = gen_weights(ws, d.n, rng);
    acc += bootstrap_sieve_variance(prob, fr, f, omega);
  }
  CHECK(acc / draws == doctest::Approx(ws.sigma_omega_sq * v1).epsilon(0.02));
}

TEST_CASE("bootstrap wald W2 critical value is near the chi-square value") {
  DGPSpec dgp;
  dgp.kind = ModelKind::NPIV;
  dgp.n = 400;
  dgp.seed = 31;
  RngStream rng(dgp.seed, 0);
  const Dataset d = gen_dgp(dgp, rng);
  ModelSpec spec;
  spec.kind = ModelKind::NPIV;
  spec.qbasis = parse_basis("pol:4", d.y2);
  spec.pbasis = parse_basis("pol:6", d.x.col(0));
  spec.lambda = 1e-5;
  FitProblem prob(spec, d);
  OptimConfig oc;
  const FitResult fr = fit_problem(prob, oc);
  const Functional f = point_eval(0.0);

  const Vec rho = residuals_from_fit(spec, prob.y1, prob.Q * fr.beta);
  const Mat dmhat = dmhat_from_parts(spec, prob.y1, prob.Q, fr.beta, prob.cache);
  const Mat D = d_matrix(dmhat, prob.sigma);
  const Vec F = gradient(f, spec.qbasis, fr.beta);
  const double v1 = variance_plugin(D, upsilon_matrix(dmhat, prob.sigma, rho), F);

  WeightScheme ws;
  ws.kind = WeightScheme::Kind::IIDExponential;
  const BootstrapRun run = bootstrap_wald(prob, fr, f, v1, ws, 500, oc,
                                          BootWaldFlavor::W2);
  std::vector<double> sq;
  for (double s : run.stats)
    if (std::isfinite(s)) sq.push_back(s * s);
  std::sort(sq.begin(), sq.end());
  const double crit = empirical_quantile(sq, 0.95);
  CHECK(std::fabs(crit - 3.841458820694124) < 0.2 * 3.841458820694124);
}

TEST_CASE("bootstrap sqlr critical value is near the chi-square value") {
  DGPSpec dgp;
  dgp.kind = ModelKind::NPQIV;
  dgp.gamma = 0.5;
  dgp.n = 400;
  dgp.seed = 33;
  RngStream rng(dgp.seed, 0);
  const Dataset d = gen_dgp(dgp, rng);
  ModelSpec spec;
  spec.kind = ModelKind::NPQIV;
  spec.gamma = 0.5;
  spec.qbasis = parse_basis("pol:4", d.y2);
  spec.pbasis = parse_basis("pol:7", d.x.col(0));
  spec.lambda = 2e-4;
  spec.weighting = WeightingRule::KnownScalar;
  spec.known_sigma_sq = 0.25;
  FitProblem prob(spec, d);
  OptimConfig oc;
  const FitResult fr = fit_problem(prob, oc);
  OptimConfig boot_oc = oc;
  boot_oc.restarts = 0;
  boot_oc.warm_refine = true;
  boot_oc.step0 = 0.08;
  boot_oc.xtol = 1e-5;
  boot_oc.max_iters = 300;
  WeightScheme ws;
  ws.kind = WeightScheme::Kind::Multinomial;
  const BootstrapRun run =
      bootstrap_sqlr(prob, fr, point_eval(0.0), ws, 500, boot_oc, 2);
  const double crit = run.critical_value(0.95);
  CHECK(std::fabs(crit - 3.841458820694124) < 0.2 * 3.841458820694124);
  CHECK(run.failures == 0);
}

TEST_CASE("bootstrap score: conditional variance identity and normality") {
  const Dataset d = small_data(150, 5);
  const ModelSpec spec = npiv_spec(d, 3, 5, 1e-6);
  FitProblem prob(spec, d);
  OptimConfig oc;
  const Functional f = point_eval(0.0);
  const FitResult res = fit_restricted_problem(prob, f, 0.0, oc);

  WeightScheme ws;
  ws.kind = WeightScheme::Kind::IIDExponential;
  const BootstrapRun run =
      bootstrap_score(spec, d, res, f, prob.cache, ws, 10000, 17);
  double mean = 0.0, var = 0.0;
  for (double s : run.stats) mean += s;
  mean /= static_cast<double>(run.stats.size());
  for (double s : run.stats) var += (s - mean) * (s - mean);
  var /= static_cast<double>(run.stats.size() - 1);
  // statistic is pre-normalized: conditional variance = sigma_omega^2 = 1
  CHECK(var == doctest::Approx(1.0).epsilon(0.03));
  CHECK(qq_data(run.stats).ks < 0.05);
}

TEST_CASE("bootstrap CI equals the asymptotic CI at the chi-square critical value") {
  const Dataset d = small_data(60, 6);
  const ModelSpec spec = npiv_spec(d, 3, 5, 0.0);
  FitProblem prob(spec, d);
  OptimConfig oc;
  const FitResult fr = fit_problem(prob, oc);
  const Functional f = point_eval(0.0);

  // run whose 95% critical value is exactly the chi-square value
  BootstrapRun run;
  run.B = 1;
  run.stats = {chi2_quantile_1(0.95)};
  const Interval boot = bootstrap_ci(prob, fr, f, run, 0.95, oc);
  const Interval asym =
      invert_ci_with_crit(prob, fr, f, chi2_quantile_1(0.95), oc);
  CHECK(boot.lo == doctest::Approx(asym.lo).epsilon(1e-10));
  CHECK(boot.hi == doctest::Approx(asym.hi).epsilon(1e-10));

  // a larger critical value widens the interval
  BootstrapRun wider;
  wider.B = 1;
  wider.stats = {2.0 * chi2_quantile_1(0.95)};
  const Interval w = bootstrap_ci(prob, fr, f, wider, 0.95, oc);
  CHECK(w.lo <= boot.lo + 1e-10);
  CHECK(w.hi >= boot.hi - 1e-10);
}
