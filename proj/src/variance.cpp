#include "sievei/variance.hpp"

#include <cmath>

namespace sievei {

namespace {

Mat weighted_gram(const Mat& dmhat, const Vec& w) {
  const auto n = static_cast<double>(dmhat.rows());
  return dmhat.transpose() * w.asDiagonal() * dmhat / n;
}

}  // namespace

Mat d_matrix(const Mat& dmhat, const SigmaHat& sigma) {
  if (sigma.values.size() != dmhat.rows())
    throw ConfigError("d_matrix: sigma length mismatch");
  return weighted_gram(dmhat, sigma.values.array().inverse());
}

Mat upsilon_matrix(const Mat& dmhat, const SigmaHat& sigma,
                   const Vec& rho_hat) {
  if (rho_hat.size() != dmhat.rows())
    throw ConfigError("upsilon_matrix: residual length mismatch");
  const Vec w =
      rho_hat.array().square() / sigma.values.array().square();
  return weighted_gram(dmhat, w);
}

Mat omega_matrix(const Mat& dmhat, const SigmaHat& sigma,
                 const SigmaHat& sigma0) {
  if (sigma0.values.size() != dmhat.rows())
    throw ConfigError("omega_matrix: sigma0 length mismatch");
  const Vec w = sigma0.values.array() / sigma.values.array().square();
  return weighted_gram(dmhat, w);
}

RieszSolution riesz_solve(const Mat& D, const Vec& F) {
  if (D.rows() != D.cols() || D.rows() != F.size())
    throw ConfigError("riesz_solve: dimension mismatch");
  RieszSolution r;
  r.D = D;
  r.F = F;
  r.gamma_star = pinv(D) * F;
  r.norm_sq = r.gamma_star.dot(D * r.gamma_star);
  return r;
}

double variance_plugin(const Mat& D, const Mat& middle, const Vec& F) {
  const Vec g = pinv(D) * F;
  return g.dot(middle * g);
}

double slope_variance_problem(const FitProblem& prob, const FitResult& fit,
                              const Functional& functional, double eps,
                              const OptimConfig& config) {
  const double phi_hat = value(functional, prob.spec.qbasis, fit.beta);
  // Default step: 4 n^{-1/2} max(1, |phi|). The admissible band for eps is
  // wide; this sits safely above the search-noise floor of the non-smooth
  // criterion while the curvature is still locally quadratic.
  if (eps <= 0.0)
    eps = 4.0 * std::max(1.0, std::fabs(phi_hat)) /
          std::sqrt(static_cast<double>(prob.n));
  const SqlrFits fits =
      sqlr_fits(prob, functional, phi_hat - eps, config, nullptr, &fit.beta);
  // Criterion slope against the best unrestricted value seen on either side.
  const double q_unres = std::min(fit.qhat, fits.unrestricted.qhat);
  const double gap = fits.restricted.qhat - q_unres;
  if (!(gap > 0.0))
    throw NumericError("slope_variance: nonpositive criterion gap");
  return eps * eps / gap;
}

double slope_variance(const ModelSpec& spec, const Dataset& data,
                      const FitResult& fit, const Functional& functional,
                      double eps, const OptimConfig& config) {
  FitProblem prob(spec, data);
  return slope_variance_problem(prob, fit, functional, eps, config);
}

}  // namespace sievei
