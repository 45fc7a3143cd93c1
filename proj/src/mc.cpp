#include "sievei/mc.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "sievei/parallel.hpp"
#include "sievei/prob.hpp"

namespace sievei {

namespace {

const Mat& design_cholesky() {
  static const Mat L = [] {
    Mat C(3, 3);
    C << 1.0, 0.8, 0.5,
         0.8, 1.0, 0.0,
         0.5, 0.0, 1.0;
    return Mat(Eigen::LLT<Mat>(C).matrixL());
  }();
  return L;
}

double binom_se(double p, int reps) {
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / std::max(reps, 1));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t rep) {
  return seed ^ (0x9E3779B97F4A7C15ull * (rep + 0x51ull));
}

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

Dataset gen_dgp(const DGPSpec& spec, RngStream& rng) {
  spec.validate();
  const Mat& L = design_cholesky();
  Dataset d;
  d.n = spec.n;
  d.y1.resize(spec.n);
  d.y2.resize(spec.n);
  d.x.resize(spec.n, 1);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    Eigen::Vector3d eps(rng.normal(), rng.normal(), rng.normal());
    const Eigen::Vector3d z = L * eps;
    const double y2 = 2.0 * (normal_cdf(z(0) / 3.0) - 0.5);
    const double x = 2.0 * (normal_cdf(z(1) / 3.0) - 0.5);
    const double h0 = 2.0 * std::sin(M_PI * y2);
    d.y2(i) = y2;
    d.x(i, 0) = x;
    if (spec.kind == ModelKind::NPIV) {
      d.y1(i) = h0 + 0.76 * z(2);
    } else {
      d.y1(i) = h0 + 2.0 * (normal_cdf(z(2)) - spec.gamma);
    }
  }
  return d;
}

ModelSpec resolve_model(const ExperimentConfig& cfg, const Dataset& data) {
  ModelSpec spec;
  spec.kind = cfg.dgp.kind;
  spec.gamma = cfg.dgp.gamma;
  spec.qbasis = parse_basis(cfg.qbasis, data.y2);
  spec.pbasis = parse_basis(cfg.pbasis, data.x.col(0));
  spec.lambda = cfg.lambda;
  if (spec.kind == ModelKind::NPQIV) {
    spec.weighting = WeightingRule::KnownScalar;
    spec.known_sigma_sq = spec.gamma * (1.0 - spec.gamma);
  } else {
    spec.weighting = WeightingRule::Identity;
  }
  return spec;
}

namespace {

Functional make_functional(const ExperimentConfig& cfg) {
  Functional f;
  f.kind = cfg.functional;
  f.ybar = cfg.ybar;
  return f;
}

}  // namespace

SizeResult run_size_experiment(const ExperimentConfig& cfg) {
  const Functional functional = make_functional(cfg);
  std::vector<double> stats(static_cast<size_t>(cfg.reps), nan_value());
  std::atomic<int> excluded{0};
  parallel_for(cfg.reps, cfg.threads, [&](long rep) {
    try {
      RngStream rng(cfg.dgp.seed, rep_stream_id(static_cast<std::uint64_t>(rep)));
      const Dataset data = gen_dgp(cfg.dgp, rng);
      const ModelSpec spec = resolve_model(cfg, data);
      FitProblem prob(spec, data);
      OptimConfig oc = cfg.optim;
      oc.seed = mix_seed(cfg.optim.seed, static_cast<std::uint64_t>(rep));
      const SqlrFits fits = sqlr_fits(prob, functional, cfg.phi0, oc);
      stats[static_cast<size_t>(rep)] = fits.statistic;
    } catch (const std::exception&) {
      excluded.fetch_add(1);
    }
  });

  SizeResult out;
  out.levels = cfg.levels;
  out.excluded = excluded.load();
  int used = 0;
  for (double s : stats)
    if (std::isfinite(s)) ++used;
  out.reps_used = used;
  for (double level : cfg.levels) {
    const double crit = chi2_quantile_1(1.0 - level);
    int rej = 0;
    for (double s : stats)
      if (std::isfinite(s) && s > crit) ++rej;
    const double p = used > 0 ? static_cast<double>(rej) / used : 0.0;
    out.rejection.push_back(p);
    out.se.push_back(binom_se(p, used));
  }
  return out;
}

VarianceResult run_variance_experiment(const ExperimentConfig& cfg) {
  const Functional functional = make_functional(cfg);
  const size_t R = static_cast<size_t>(cfg.reps);
  std::vector<double> phi(R, nan_value()), v1(R, nan_value()),
      v2(R, nan_value());
  std::atomic<int> excluded{0};
  parallel_for(cfg.reps, cfg.threads, [&](long rep) {
    try {
      RngStream rng(cfg.dgp.seed, rep_stream_id(static_cast<std::uint64_t>(rep)));
      const Dataset data = gen_dgp(cfg.dgp, rng);
      const ModelSpec spec = resolve_model(cfg, data);
      FitProblem prob(spec, data);
      OptimConfig oc = cfg.optim;
      oc.seed = mix_seed(cfg.optim.seed, static_cast<std::uint64_t>(rep));
      const FitResult fr = fit_problem(prob, oc);
      const Vec rho = residuals_from_fit(spec, prob.y1, prob.Q * fr.beta);
      const Mat dmhat =
          dmhat_from_parts(spec, prob.y1, prob.Q, fr.beta, prob.cache);
      const Mat D = d_matrix(dmhat, prob.sigma);
      const Vec F = gradient(functional, spec.qbasis, fr.beta);
      const Mat ups = upsilon_matrix(dmhat, prob.sigma, rho);
      // V2's middle matrix needs the series fit of rho^2, clamped below.
      const double mean_u2 = rho.array().square().mean();
      const Vec rho2 = rho.array().square();
      SigmaHat sig0;
      sig0.values = prob.cache.project(rho2).array().max(1e-6 * mean_u2);
      const Mat om = omega_matrix(dmhat, prob.sigma, sig0);
      phi[static_cast<size_t>(rep)] = value(functional, spec.qbasis, fr.beta);
      v1[static_cast<size_t>(rep)] = variance_plugin(D, ups, F);
      v2[static_cast<size_t>(rep)] = variance_plugin(D, om, F);
    } catch (const std::exception&) {
      excluded.fetch_add(1);
    }
  });

  // Pass 1: the MC variance of sqrt(n) phi_hat as the reference sieve
  // variance; pass 2: median relative errors and t rejections against it.
  std::vector<double> phis;
  for (double p : phi)
    if (std::isfinite(p)) phis.push_back(p);
  VarianceResult out;
  out.excluded = excluded.load();
  out.reps_used = static_cast<int>(phis.size());
  if (phis.empty()) throw NumericError("run_variance_experiment: all reps failed");
  double mean_phi = 0.0;
  for (double p : phis) mean_phi += p;
  mean_phi /= static_cast<double>(phis.size());
  double var_phi = 0.0;
  for (double p : phis) var_phi += (p - mean_phi) * (p - mean_phi);
  var_phi /= static_cast<double>(phis.size() - 1);
  out.mc_variance = static_cast<double>(cfg.dgp.n) * var_phi;

  std::vector<double> rel1, rel2;
  for (size_t r = 0; r < R; ++r) {
    if (!std::isfinite(phi[r])) continue;
    rel1.push_back(std::fabs(v1[r] / out.mc_variance - 1.0));
    rel2.push_back(std::fabs(v2[r] / out.mc_variance - 1.0));
    const double rootn_dev =
        std::sqrt(static_cast<double>(cfg.dgp.n)) * (phi[r] - cfg.phi0);
    out.t1.push_back(rootn_dev / std::sqrt(v1[r]));
    out.t2.push_back(rootn_dev / std::sqrt(v2[r]));
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t m = v.size();
    return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
  };
  out.med_v1 = median(rel1);
  out.med_v2 = median(rel2);

  out.levels = {0.05, 0.10};
  for (double level : out.levels) {
    const double z = normal_quantile(1.0 - 0.5 * level);
    int r1 = 0, r2 = 0;
    for (size_t i = 0; i < out.t1.size(); ++i) {
      if (std::fabs(out.t1[i]) > z) ++r1;
      if (std::fabs(out.t2[i]) > z) ++r2;
    }
    const double n_used = static_cast<double>(out.t1.size());
    out.rej_t1.push_back(r1 / n_used);
    out.rej_t2.push_back(r2 / n_used);
    out.se.push_back(binom_se(r1 / n_used, out.reps_used));
  }
  out.ks_t1 = qq_data(out.t1).ks;
  out.ks_t2 = qq_data(out.t2).ks;
  return out;
}

PowerResult run_power_curve(const ExperimentConfig& cfg,
                            const std::vector<double>& r_grid) {
  if (!cfg.boot)
    throw ConfigError("run_power_curve: bootstrap configuration required");
  const Functional functional = make_functional(cfg);
  const auto nr = static_cast<Eigen::Index>(r_grid.size());
  const auto nl = static_cast<Eigen::Index>(cfg.levels.size());
  const size_t R = static_cast<size_t>(cfg.reps);

  // stats[rep] = SQLR at each grid point; crit[rep] = bootstrap critical
  // values at each level (the bootstrap law does not depend on r).
  Mat stats = Mat::Constant(static_cast<Eigen::Index>(R), nr, nan_value());
  Mat crits = Mat::Constant(static_cast<Eigen::Index>(R), nl, nan_value());
  std::atomic<int> excluded{0};
  parallel_for(cfg.reps, cfg.threads, [&](long rep) {
    try {
      RngStream rng(cfg.dgp.seed, rep_stream_id(static_cast<std::uint64_t>(rep)));
      const Dataset data = gen_dgp(cfg.dgp, rng);
      const ModelSpec spec = resolve_model(cfg, data);
      FitProblem prob(spec, data);
      OptimConfig oc = cfg.optim;
      oc.seed = mix_seed(cfg.optim.seed, static_cast<std::uint64_t>(rep));
      const FitResult unres = fit_problem(prob, oc);
      // Bootstrap replications warm-start at the sample optimum; a single
      // simplex run per side is enough there, and the statistic only uses
      // the difference of the two criteria.
      OptimConfig boot_oc = oc;
      boot_oc.restarts = 0;
      boot_oc.xtol = std::max(oc.xtol, 1e-5);
      boot_oc.max_iters = std::min(oc.max_iters, 300);
      boot_oc.warm_refine = true;
      boot_oc.step0 = 0.08;
      const BootstrapRun brun = bootstrap_sqlr(
          prob, unres, functional, cfg.boot->scheme, cfg.boot->B, boot_oc,
          /*threads=*/1);
      for (Eigen::Index l = 0; l < nl; ++l)
        crits(rep, l) = brun.critical_value(1.0 - cfg.levels[l]);
      // One unrestricted optimum per dataset: restricted fits warm-start
      // from it, and each feeds a polish candidate back, so the whole grid
      // is compared against the best unrestricted value found.
      std::vector<double> qr(static_cast<size_t>(nr));
      double qu = unres.qhat;
      OptimConfig polish = oc;
      polish.restarts = 0;
      for (Eigen::Index g = 0; g < nr; ++g) {
        const FitResult res = fit_restricted_problem(prob, functional,
                                                     r_grid[g], oc,
                                                     /*omega=*/nullptr,
                                                     &unres.beta);
        qr[static_cast<size_t>(g)] = res.qhat;
        const FitResult again = fit_problem(prob, polish, nullptr, &res.beta);
        qu = std::min(qu, again.qhat);
      }
      for (Eigen::Index g = 0; g < nr; ++g)
        stats(rep, g) = std::max(
            0.0, static_cast<double>(data.n) *
                     (qr[static_cast<size_t>(g)] - qu));
    } catch (const std::exception&) {
      excluded.fetch_add(1);
    }
  });

  PowerResult out;
  out.r_grid = r_grid;
  out.levels = cfg.levels;
  out.excluded = excluded.load();
  out.rej_asym = Mat::Zero(nr, nl);
  out.rej_boot = Mat::Zero(nr, nl);
  int used = 0;
  for (Eigen::Index rep = 0; rep < static_cast<Eigen::Index>(R); ++rep) {
    if (!std::isfinite(stats(rep, 0))) continue;
    ++used;
    for (Eigen::Index g = 0; g < nr; ++g) {
      for (Eigen::Index l = 0; l < nl; ++l) {
        const double crit_asym = chi2_quantile_1(1.0 - cfg.levels[l]);
        if (stats(rep, g) > crit_asym) out.rej_asym(g, l) += 1.0;
        if (stats(rep, g) > crits(rep, l)) out.rej_boot(g, l) += 1.0;
      }
    }
  }
  out.reps_used = used;
  if (used > 0) {
    out.rej_asym /= static_cast<double>(used);
    out.rej_boot /= static_cast<double>(used);
  }
  return out;
}

QQData qq_data(const std::vector<double>& stats) {
  if (stats.empty()) throw ConfigError("qq_data: empty statistics");
  QQData q;
  const auto m = static_cast<Eigen::Index>(stats.size());
  q.empirical = Eigen::Map<const Vec>(stats.data(), m);
  std::sort(q.empirical.data(), q.empirical.data() + m);
  q.theoretical.resize(m);
  for (Eigen::Index i = 0; i < m; ++i)
    q.theoretical(i) =
        normal_quantile((static_cast<double>(i) + 0.5) / static_cast<double>(m));
  double ks = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double cdf = normal_cdf(q.empirical(i));
    const double hi = (static_cast<double>(i) + 1.0) / static_cast<double>(m);
    const double lo = static_cast<double>(i) / static_cast<double>(m);
    ks = std::max(ks, std::max(std::fabs(hi - cdf), std::fabs(cdf - lo)));
  }
  q.ks = ks;
  return q;
}

}  // namespace sievei
