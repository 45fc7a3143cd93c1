#pragma once

#include <vector>

namespace sievei {

// Standard normal cdf, rational approximation (Cody-style erf/erfc),
// absolute error well below 1e-7 everywhere.
double normal_cdf(double x);

double normal_pdf(double x);

// Inverse standard normal cdf (Wichura AS241-style rational approximation).
double normal_quantile(double p);

// chi^2 with 1 degree of freedom, via the normal: P(Z^2 <= x).
double chi2_cdf_1(double x);
double chi2_quantile_1(double p);

// Empirical quantile with linear interpolation between order statistics
// (h = u * (n - 1)); `sorted` must be ascending.
double empirical_quantile(const std::vector<double>& sorted, double u);

}  // namespace sievei
