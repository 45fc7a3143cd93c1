// Pointwise SQLR confidence bands for a quantile IV curve on synthetic data,
// using the fixed 30-point grid construction (grid centered at the estimate,
// steps of 0.002 below and 0.008 above, extremes pushed past the chi^2_1
// cutoff), plus a curvature-functional linearity test. Output is a
// plot-ready CSV.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "sievei/inference.hpp"
#include "sievei/mc.hpp"
#include "sievei/prob.hpp"

using namespace sievei;

int main(int argc, char** argv) {
  const std::string out = argc > 1 ? argv[1] : "band_demo.csv";
  const Eigen::Index n = argc > 2 ? std::atol(argv[2]) : 500;

  DGPSpec dgp;
  dgp.kind = ModelKind::NPQIV;
  dgp.gamma = 0.5;
  dgp.n = n;
  dgp.seed = 7;
  RngStream rng(dgp.seed, 0);
  const Dataset data = gen_dgp(dgp, rng);

  ModelSpec spec;
  spec.kind = ModelKind::NPQIV;
  spec.gamma = 0.5;
  spec.qbasis = parse_basis("pspline:3:2", data.y2);
  spec.pbasis = parse_basis("pol:7", data.x.col(0));
  spec.lambda = 5e-4;
  spec.weighting = WeightingRule::KnownScalar;
  spec.known_sigma_sq = 0.25;

  OptimConfig oc;
  oc.seed = 99;
  FitProblem prob(spec, data);
  const FitResult fr = fit_problem(prob, oc);
  const double crit = chi2_quantile_1(0.95);

  auto qlr_at = [&](const Functional& f, double r) {
    const FitResult res = fit_restricted_problem(prob, f, r, oc);
    return std::max(0.0, static_cast<double>(n) * (res.qhat - fr.qhat));
  };

  Table band;
  band.columns = {"y2", "lo", "estimate", "hi"};
  const int points = 15;
  for (int i = 0; i < points; ++i) {
    const double y = -0.9 + 1.8 * i / (points - 1.0);
    Functional f;
    f.kind = FunctionalKind::PointEval;
    f.ybar = y;
    const double est = value(f, spec.qbasis, fr.beta);

    // 30-point grid centered at the estimate: r_15 = estimate, steps of
    // 0.002 going down and 0.008 going up. The extremes r_1 and r_30 must
    // reject, so keep stepping past the grid edge until the SQLR crosses
    // the critical value; the band is the smallest interval containing all
    // accepted points.
    std::vector<double> grid(30);
    grid[14] = est;
    for (int j = 13; j >= 0; --j) grid[j] = grid[j + 1] - 0.002;
    for (int j = 15; j <= 29; ++j) grid[j] = grid[j - 1] + 0.008;

    double lo = est, hi = est;
    for (double r : grid) {
      if (qlr_at(f, r) <= crit) {
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
    }
    double r = grid[0];
    while (qlr_at(f, r) <= crit) {
      lo = r;
      r -= 0.024;
    }
    r = grid[29];
    while (qlr_at(f, r) <= crit) {
      hi = r;
      r += 0.024;
    }
    band.add_row({Cell{y}, Cell{lo}, Cell{est}, Cell{hi}});
    std::fprintf(stderr, "y2=%+.3f  band=[%.4f, %.4f]\n", y, lo, hi);
  }
  write_table(band, out);

  // Is the curve linear? Test the weighted curvature functional at zero.
  Functional curv;
  curv.kind = FunctionalKind::CurvatureQuadratic;
  curv.weight = Weight::trunc_gauss_from(data.y2);
  const FitResult res0 = fit_restricted_problem(prob, curv, 0.0, oc);
  const InferenceReport lin = sqlr_test(fr, res0, n, true);
  std::cout << "linearity SQLR = " << lin.statistic
            << ", p = " << (lin.pvalue ? *lin.pvalue : -1.0) << "\n";
  std::cout << "bands written to " << out << "\n";
  return 0;
}
