#pragma once

#include <string>
#include <vector>

#include "sievei/linalg.hpp"

namespace sievei {

enum class BasisKind { PowerSeries, PolySpline };

// A resolved sieve basis: power series 1, y, ..., y^(J-1), or a degree-r
// polynomial spline in truncated-power form {1, y, ..., y^r, (y-t_j)_+^r}
// with k interior knots, dim = (r+1)+k.
struct BasisSpec {
  BasisKind kind = BasisKind::PowerSeries;
  int dim = 1;
  int degree = 0;             // spline degree r (PowerSeries: dim-1)
  double support_lo = -1.0;
  double support_hi = 1.0;
  std::vector<double> knots;  // empty for PowerSeries

  void validate() const;
};

// Knots at the empirical quantiles j/(k+1), j = 1..k.
std::vector<double> quantile_knots(const Vec& data, int k);

BasisSpec make_power_series(int terms, double lo, double hi);
BasisSpec make_poly_spline(int degree, const std::vector<double>& knots,
                           double lo, double hi);

// Parse "pol:J" / "pspline:r:k"; knots and support are resolved from `data`
// (support = empirical range widened by 1e-9).
BasisSpec parse_basis(const std::string& text, const Vec& data);

// Row i = basis functions (or their deriv_order-th derivatives) at points[i].
Mat eval_basis(const BasisSpec& spec, const Vec& points, int deriv_order = 0);

struct PenaltyGram {
  Mat R;  // dim x dim, integral of q q' + (grad q)(grad q)' over the support
};

// Gauss-Legendre over the support, piecewise between knots for splines.
PenaltyGram penalty_gram(const BasisSpec& spec, int quad_nodes);

std::string basis_to_string(const BasisSpec& spec);

}  // namespace sievei
