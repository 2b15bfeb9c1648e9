#pragma once

#include <algorithm>
#include <vector>

#include <Eigen/Eigenvalues>

#include "prism/common.hpp"
#include "prism/rng.hpp"
#include "prism/simplex.hpp"

namespace prism::test {

// Symmetric PSD square root with a numerical-rank cutoff; eigenvalues at
// roundoff scale (the singular direction of a Dirichlet covariance) are
// treated as exact zeros instead of becoming spurious tiny singular values.
inline Matrix psd_sqrt(const Matrix& sym) {
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const double lam_max = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double cutoff =
      static_cast<double>(sym.rows()) * std::numeric_limits<double>::epsilon() * lam_max;
  Vector roots = Vector::Zero(sym.rows());
  for (Index i = 0; i < sym.rows(); ++i)
    if (eig.eigenvalues()(i) > cutoff) roots(i) = std::sqrt(eig.eigenvalues()(i));
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline Vector random_alpha(Index k, Rng& rng, double lo = 0.5, double hi = 4.0) {
  Vector a(k);
  for (Index i = 0; i < k; ++i) a(i) = lo + (hi - lo) * uniform_open01(rng);
  return a;
}

inline Vector random_gaussian_vector(Index n, Rng& rng) {
  NormalSampler normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace prism::test
