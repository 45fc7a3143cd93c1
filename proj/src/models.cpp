#include "sievei/models.hpp"

#include <cmath>

#include "sievei/prob.hpp"

namespace sievei {

void ModelSpec::validate() const {
  qbasis.validate();
  pbasis.validate();
  if (kind == ModelKind::NPQIV && !(gamma > 0.0 && gamma < 1.0))
    throw ConfigError("model: NPQIV gamma must be strictly inside (0,1)");
  if (lambda < 0.0) throw ConfigError("model: lambda must be >= 0");
  if (weighting == WeightingRule::KnownScalar && !(known_sigma_sq > 0.0))
    throw ConfigError("model: known sigma^2 must be positive");
}

Mat instrument_design(const ModelSpec& spec, const Dataset& data) {
  if (!spec.tensor_x || data.x.cols() == 1)
    return eval_basis(spec.pbasis, data.x.col(0), 0);
  // Row-wise tensor product of the same basis across instrument columns.
  Mat design = eval_basis(spec.pbasis, data.x.col(0), 0);
  for (Eigen::Index c = 1; c < data.x.cols(); ++c) {
    const Mat next = eval_basis(spec.pbasis, data.x.col(c), 0);
    Mat combined(design.rows(), design.cols() * next.cols());
    for (Eigen::Index i = 0; i < design.rows(); ++i)
      for (Eigen::Index a = 0; a < design.cols(); ++a)
        for (Eigen::Index b = 0; b < next.cols(); ++b)
          combined(i, a * next.cols() + b) = design(i, a) * next(i, b);
    design.swap(combined);
  }
  return design;
}

Mat structural_design(const ModelSpec& spec, const Dataset& data) {
  return eval_basis(spec.qbasis, data.y2, 0);
}

Vec residuals_from_fit(const ModelSpec& spec, const Vec& y1, const Vec& hfit) {
  if (y1.size() != hfit.size())
    throw ConfigError("residuals: length mismatch");
  if (spec.kind == ModelKind::NPIV) return y1 - hfit;
  Vec rho(y1.size());
  for (Eigen::Index i = 0; i < y1.size(); ++i)
    rho(i) = (y1(i) <= hfit(i) ? 1.0 : 0.0) - spec.gamma;
  return rho;
}

Vec residuals(const ModelSpec& spec, const Dataset& data, const Vec& beta) {
  if (beta.size() != spec.qbasis.dim)
    throw ConfigError("residuals: beta length does not match qbasis dim");
  const Vec hfit = structural_design(spec, data) * beta;
  return residuals_from_fit(spec, data.y1, hfit);
}

Vec m_hat(const ModelSpec& spec, const Dataset& data, const Vec& beta,
          const ProjectionCache& cache, const std::optional<Vec>& eval_x) {
  const Vec rho = residuals(spec, data, beta);
  if (!eval_x) return cache.project(rho);
  const Vec coef = cache.ls_coefficients(rho);
  return eval_basis(spec.pbasis, *eval_x, 0) * coef;
}

double criterion(const ModelSpec& spec, const Dataset& data, const Vec& beta,
                 const ProjectionCache& cache, const SigmaHat& sigma) {
  const Vec rho = residuals(spec, data, beta);
  const auto n = static_cast<double>(data.n);
  if (sigma.constant) {
    if (!(sigma.constant_value > 0.0))
      throw NumericError("criterion: nonpositive weighting");
    return projection_quadform(cache, rho) / (n * sigma.constant_value);
  }
  if (sigma.values.size() != data.n)
    throw ConfigError("criterion: sigma length mismatch");
  if ((sigma.values.array() <= 0.0).any())
    throw NumericError("criterion: nonpositive weighting");
  const Vec mh = cache.project(rho);
  return (mh.array().square() / sigma.values.array()).sum() / n;
}

Mat dmhat_from_parts(const ModelSpec& spec, const Vec& y1, const Mat& Q,
                     const Vec& beta, const ProjectionCache& cache) {
  if (spec.kind == ModelKind::NPIV) return cache.project(Q);
  if (!spec.numeric_derivative) throw NonSmoothResidualError();
  // Smoothed indicator: Phi((h(y2)-y1)/b) - gamma with b = n^{-1/5} sd(U),
  // differentiated by symmetric differences in each coefficient.
  const auto n = y1.size();
  const Vec u = y1 - Q * beta;
  const double sd = std::sqrt((u.array() - u.mean()).square().sum() /
                              static_cast<double>(n - 1));
  const double b =
      std::pow(static_cast<double>(n), -0.2) * std::max(sd, 1e-12);
  auto smoothed = [&](const Vec& bb) {
    Vec rho(n);
    const Vec h = Q * bb;
    for (Eigen::Index i = 0; i < n; ++i)
      rho(i) = normal_cdf((h(i) - y1(i)) / b) - spec.gamma;
    return rho;
  };
  Mat d(n, spec.qbasis.dim);
  for (int j = 0; j < spec.qbasis.dim; ++j) {
    const double step = 1e-5 * (1.0 + std::fabs(beta(j))) * b;
    Vec bp = beta, bm = beta;
    bp(j) += step;
    bm(j) -= step;
    d.col(j) = (smoothed(bp) - smoothed(bm)) / (2.0 * step);
  }
  return cache.project(d);
}

Mat dmhat_matrix(const ModelSpec& spec, const Dataset& data, const Vec& beta,
                 const ProjectionCache& cache) {
  return dmhat_from_parts(spec, data.y1, structural_design(spec, data), beta,
                          cache);
}

SigmaHat sigma0_series(const ModelSpec& spec, const Dataset& data,
                       const Vec& beta, const ProjectionCache& cache,
                       double floor) {
  SigmaHat s;
  if (spec.kind == ModelKind::NPQIV) {
    s.constant = true;
    s.constant_value = spec.gamma * (1.0 - spec.gamma);
    s.values = Vec::Constant(data.n, s.constant_value);
    return s;
  }
  const Vec u = residuals(spec, data, beta);
  const double mean_u2 = u.array().square().mean();
  if (mean_u2 <= 0.0)
    throw NumericError("sigma0_series: all residuals are zero");
  if (floor < 0.0) floor = 1e-6 * mean_u2;
  const Vec u2 = u.array().square();
  s.values = cache.project(u2);
  s.values = s.values.array().max(floor).matrix();
  return s;
}

SigmaHat make_sigma(const ModelSpec& spec, const Dataset& data, const Vec& beta,
                    const ProjectionCache& cache) {
  SigmaHat s;
  switch (spec.weighting) {
    case WeightingRule::Identity:
      s.constant = true;
      s.constant_value = 1.0;
      s.values = Vec::Constant(data.n, 1.0);
      return s;
    case WeightingRule::KnownScalar:
      s.constant = true;
      s.constant_value = spec.known_sigma_sq;
      s.values = Vec::Constant(data.n, spec.known_sigma_sq);
      return s;
    case WeightingRule::SeriesSigma0:
      return sigma0_series(spec, data, beta, cache);
  }
  throw ConfigError("make_sigma: unknown weighting");
}

}  // namespace sievei
