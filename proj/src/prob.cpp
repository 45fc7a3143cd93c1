#include "sievei/prob.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace sievei {

namespace {

// Rational approximation to erfc on [0.46875, 4], Cody (1969) coefficients.
double erfc_mid(double x) {
  static const double p[] = {3.004592610201616005e2, 4.519189537118729422e2,
                             3.393208167343436870e2, 1.529892850469404039e2,
                             4.316222722205673530e1, 7.211758250883093659e0,
                             5.641955174789739711e-1, -1.368648573827167067e-7};
  static const double q[] = {3.004592609569832933e2, 7.909509253278980272e2,
                             9.313540948506096211e2, 6.389802644656311665e2,
                             2.775854447439876434e2, 7.700015293522947295e1,
                             1.278272731962942351e1, 1.0};
  double num = p[7], den = q[7];
  for (int i = 6; i >= 0; --i) {
    num = num * x + p[i];
    den = den * x + q[i];
  }
  return std::exp(-x * x) * num / den;
}

// Rational approximation to x*exp(x^2)*erfc(x) on [4, inf), Cody (1969).
double erfc_far(double x) {
  static const double p[] = {-2.99610707703542174e-3, -4.94730910623250734e-2,
                             -2.26956593539686930e-1, -2.78661308609647788e-1,
                             -2.23192459734184686e-2};
  static const double q[] = {1.06209230528467918e-2, 1.91308926107829841e-1,
                             1.05167510706793207e0, 1.98733201817135256e0, 1.0};
  double z = 1.0 / (x * x);
  double num = p[4], den = q[4];
  for (int i = 3; i >= 0; --i) {
    num = num * z + p[i];
    den = den * z + q[i];
  }
  double r = z * num / den;
  static const double inv_sqrt_pi = 0.564189583547756287;
  return std::exp(-x * x) / x * (inv_sqrt_pi + r);
}

// erf on [0, 0.46875], Cody (1969).
double erf_small(double x) {
  static const double p[] = {2.426679552305318231e2, 2.197926161829415553e1,
                             6.996383488619136151e0, -3.560984370181538085e-2};
  static const double q[] = {2.150588758698612432e2, 9.116490540451490250e1,
                             1.508279763040779019e1, 1.0};
  double z = x * x;
  double num = p[3], den = q[3];
  for (int i = 2; i >= 0; --i) {
    num = num * z + p[i];
    den = den * z + q[i];
  }
  return x * num / den;
}

double erfc_pos(double x) {
  if (x < 0.46875) return 1.0 - erf_small(x);
  if (x < 4.0) return erfc_mid(x);
  if (x > 26.6) return 0.0;
  return erfc_far(x);
}

}  // namespace

double normal_cdf(double x) {
  static const double inv_sqrt2 = 0.7071067811865475244;
  double t = -x * inv_sqrt2;
  double e = (t >= 0.0) ? erfc_pos(t) : 2.0 - erfc_pos(-t);
  return 0.5 * e;
}

double normal_pdf(double x) {
  static const double inv_sqrt_2pi = 0.3989422804014326779;
  return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("normal_quantile: p must be in (0,1)");
  // Wichura's AS241 (PPND16).
  double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -val : val;
}

double chi2_cdf_1(double x) {
  if (x <= 0.0) return 0.0;
  return 2.0 * normal_cdf(std::sqrt(x)) - 1.0;
}

double chi2_quantile_1(double p) {
  if (!(p >= 0.0 && p < 1.0))
    throw std::invalid_argument("chi2_quantile_1: p must be in [0,1)");
  if (p == 0.0) return 0.0;
  double z = normal_quantile(0.5 * (1.0 + p));
  return z * z;
}

double empirical_quantile(const std::vector<double>& sorted, double u) {
  if (sorted.empty())
    throw std::invalid_argument("empirical_quantile: empty sample");
  if (u <= 0.0) return sorted.front();
  if (u >= 1.0) return sorted.back();
  const double h = u * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace sievei
