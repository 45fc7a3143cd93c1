#include "sievei/basis.hpp"

#include <algorithm>
#include <cmath>

#include "sievei/prob.hpp"

namespace sievei {

namespace {

// d^o/dy^o of y^p at y, with the falling-factorial coefficient.
double power_deriv(double y, int p, int o) {
  if (o > p) return 0.0;
  double coef = 1.0;
  for (int j = 0; j < o; ++j) coef *= static_cast<double>(p - j);
  return coef * std::pow(y, p - o);
}

// d^o/dy^o of (y - t)_+^r; left-continuous at the knot.
double truncated_power_deriv(double y, double t, int r, int o) {
  if (y <= t) return 0.0;
  return power_deriv(y - t, r, o);
}

}  // namespace

void BasisSpec::validate() const {
  if (dim < 1) throw ConfigError("basis: dim must be >= 1");
  if (!(support_lo < support_hi)) throw ConfigError("basis: empty support");
  if (kind == BasisKind::PolySpline) {
    const int k = static_cast<int>(knots.size());
    if (dim != degree + 1 + k)
      throw ConfigError("basis: spline dim must equal (r+1)+k");
    for (size_t j = 0; j < knots.size(); ++j) {
      if (knots[j] <= support_lo || knots[j] >= support_hi)
        throw ConfigError("basis: knots must lie strictly inside support");
      if (j > 0 && knots[j] <= knots[j - 1])
        throw ConfigError("basis: knots must be strictly increasing");
    }
  } else if (!knots.empty()) {
    throw ConfigError("basis: power series has no knots");
  }
}

std::vector<double> quantile_knots(const Vec& data, int k) {
  if (k < 1) throw ConfigError("quantile_knots: k must be >= 1");
  std::vector<double> sorted(data.data(), data.data() + data.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<int>(distinct.size()) < k + 2)
    throw NumericError("quantile_knots: too few distinct values for " +
                       std::to_string(k) + " knots");
  std::vector<double> knots(k);
  for (int j = 1; j <= k; ++j)
    knots[j - 1] = empirical_quantile(sorted, static_cast<double>(j) / (k + 1));
  for (int j = 1; j < k; ++j)
    if (knots[j] <= knots[j - 1])
      throw NumericError("quantile_knots: degenerate (tied) knots");
  return knots;
}

BasisSpec make_power_series(int terms, double lo, double hi) {
  BasisSpec spec;
  spec.kind = BasisKind::PowerSeries;
  spec.dim = terms;
  spec.degree = terms - 1;
  spec.support_lo = lo;
  spec.support_hi = hi;
  spec.validate();
  return spec;
}

BasisSpec make_poly_spline(int degree, const std::vector<double>& knots,
                           double lo, double hi) {
  BasisSpec spec;
  spec.kind = BasisKind::PolySpline;
  spec.degree = degree;
  spec.knots = knots;
  spec.dim = degree + 1 + static_cast<int>(knots.size());
  spec.support_lo = lo;
  spec.support_hi = hi;
  spec.validate();
  return spec;
}

BasisSpec parse_basis(const std::string& text, const Vec& data) {
  const double lo = data.minCoeff() - 1e-9;
  const double hi = data.maxCoeff() + 1e-9;
  if (text.rfind("pol:", 0) == 0) {
    const int terms = std::atoi(text.c_str() + 4);
    if (terms < 1) throw ConfigError("bad basis string: " + text);
    return make_power_series(terms, lo, hi);
  }
  if (text.rfind("pspline:", 0) == 0) {
    const std::string rest = text.substr(8);
    const auto colon = rest.find(':');
    if (colon == std::string::npos)
      throw ConfigError("bad basis string: " + text);
    const int r = std::atoi(rest.substr(0, colon).c_str());
    const int k = std::atoi(rest.substr(colon + 1).c_str());
    if (r < 1 || k < 1) throw ConfigError("bad basis string: " + text);
    return make_poly_spline(r, quantile_knots(data, k), lo, hi);
  }
  throw ConfigError("unknown basis string: " + text +
                    " (expected pol:J or pspline:r:k)");
}

Mat eval_basis(const BasisSpec& spec, const Vec& points, int deriv_order) {
  spec.validate();
  if (deriv_order < 0) throw ConfigError("eval_basis: negative deriv order");
  if (!points.allFinite()) throw ConfigError("eval_basis: non-finite points");
  if (spec.kind == BasisKind::PolySpline && deriv_order > spec.degree)
    throw ConfigError(
        "eval_basis: derivative order exceeds spline degree (unsupported)");
  Mat out(points.size(), spec.dim);
  if (spec.kind == BasisKind::PowerSeries) {
    for (Eigen::Index i = 0; i < points.size(); ++i)
      for (int p = 0; p < spec.dim; ++p)
        out(i, p) = power_deriv(points(i), p, deriv_order);
    return out;
  }
  for (Eigen::Index i = 0; i < points.size(); ++i) {
    const double y = points(i);
    for (int p = 0; p <= spec.degree; ++p)
      out(i, p) = power_deriv(y, p, deriv_order);
    for (size_t j = 0; j < spec.knots.size(); ++j)
      out(i, spec.degree + 1 + static_cast<Eigen::Index>(j)) =
          truncated_power_deriv(y, spec.knots[j], spec.degree, deriv_order);
  }
  return out;
}

PenaltyGram penalty_gram(const BasisSpec& spec, int quad_nodes) {
  spec.validate();
  if (quad_nodes < spec.dim)
    throw ConfigError("penalty_gram: quad_nodes must be >= basis dim");
  auto [x, w] = gauss_legendre_piecewise(quad_nodes, spec.support_lo,
                                         spec.support_hi, spec.knots);
  const Mat b0 = eval_basis(spec, x, 0);
  const Mat b1 = eval_basis(spec, x, 1);
  PenaltyGram g;
  g.R = b0.transpose() * w.asDiagonal() * b0 +
        b1.transpose() * w.asDiagonal() * b1;
  g.R = 0.5 * (g.R + g.R.transpose().eval());  // enforce exact symmetry
  return g;
}

std::string basis_to_string(const BasisSpec& spec) {
  if (spec.kind == BasisKind::PowerSeries)
    return "Pol(" + std::to_string(spec.dim) + ")";
  return "P-Spline(" + std::to_string(spec.degree) + "," +
         std::to_string(spec.knots.size()) + ")";
}

}  // namespace sievei
