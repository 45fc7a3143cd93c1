#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>

#include <algorithm>
#include <utility>
#include <vector>

#include "sievei/errors.hpp"

namespace sievei {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Moore-Penrose pseudo-inverse via SVD. Singular values <= rtol * sigma_max
// are treated as zero; rtol < 0 selects the default 1e-12 * max(rows, cols).
template <typename Derived>
Mat pinv(const Eigen::MatrixBase<Derived>& m, double rtol = -1.0) {
  using Scalar = typename Derived::Scalar;
  static_assert(std::is_same_v<Scalar, double>, "pinv expects double matrices");
  if (rtol < 0.0)
    rtol = 1e-12 * static_cast<double>(std::max(m.rows(), m.cols()));
  Eigen::JacobiSVD<Mat> svd(m.derived(),
                            Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& s = svd.singularValues();
  const double cutoff = (s.size() > 0) ? rtol * s(0) : 0.0;
  Vec inv = Vec::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cutoff) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Series projection machinery for an instrument design matrix P (n x J).
// Stores the SVD once; all downstream quantities -- the sample projection
// P(P'P)^- P', the generalized inverse (P'P)^-, and series-LS coefficient
// maps -- reuse it.
class ProjectionCache {
 public:
  explicit ProjectionCache(Mat P, double rtol = -1.0);

  const Mat& P() const { return P_; }
  const Mat& PtP_pinv() const { return PtP_pinv_; }
  Eigen::Index rank() const { return rank_; }
  Eigen::Index n() const { return P_.rows(); }
  Eigen::Index J() const { return P_.cols(); }

  // Fitted values of the series LS regression of v on P, i.e. P(P'P)^- P' v.
  Vec project(const Vec& v) const;
  // Same, column-wise.
  Mat project(const Mat& m) const;

  // U1'v, the coordinates of the projection in an orthonormal basis of
  // col(P); its squared norm equals the projection quadratic form.
  Vec half_projection(const Vec& v) const { return U1_.transpose() * v; }

  // Coefficients (P'P)^- P' v of the series LS fit (for evaluating the fit
  // off-sample).
  Vec ls_coefficients(const Vec& v) const;

 private:
  Mat P_;
  Mat U1_;       // n x rank, orthonormal columns spanning col(P)
  Mat V1_;       // J x rank
  Vec s1_;       // retained singular values
  Mat PtP_pinv_; // J x J
  Eigen::Index rank_ = 0;
};

// v' P (P'P)^- P' v  ==  sum_i mhat(X_i)^2 for the series LS fit of v.
double projection_quadform(const ProjectionCache& cache, const Vec& v);

// Gauss-Legendre nodes and weights on [a, b]; exact for polynomials up to
// degree 2*nodes - 1.
std::pair<Vec, Vec> gauss_legendre(int nodes, double a, double b);

// Piecewise Gauss-Legendre over [a, b] split at the interior breakpoints
// (used for splines, whose integrands are only piecewise polynomial).
std::pair<Vec, Vec> gauss_legendre_piecewise(int nodes_per_piece, double a,
                                             double b,
                                             const std::vector<double>& breaks);

}  // namespace sievei
