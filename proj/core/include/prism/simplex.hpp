#pragma once

#include <vector>

#include "prism/common.hpp"
#include "prism/rng.hpp"

namespace prism {

/// Tolerance on |1'z - 1| when validating probability vectors.
inline constexpr double kSimplexSumTol = 1e-9;

/// A point on the k-simplex: entries >= 0, summing to 1 within kSimplexSumTol.
/// The checked constructor throws std::invalid_argument on violation;
/// unchecked() is for values whose construction already guarantees the
/// invariants (e.g. normalized Gamma draws).
class SimplexVector {
 public:
  explicit SimplexVector(Vector v);

  static SimplexVector unchecked(Vector v) { return SimplexVector(std::move(v), UncheckedTag{}); }

  const Vector& vec() const noexcept { return v_; }
  Index size() const noexcept { return v_.size(); }
  double operator[](Index i) const { return v_(i); }

 private:
  struct UncheckedTag {};
  SimplexVector(Vector v, UncheckedTag) : v_(std::move(v)) {}
  Vector v_;
};

/// Dirichlet concentration parameter: alpha > 0 entrywise, dimension k >= 2.
class DirichletParams {
 public:
  explicit DirichletParams(Vector alpha);

  const Vector& alpha() const noexcept { return alpha_; }
  Index dim() const noexcept { return alpha_.size(); }
  double sum() const noexcept { return sum_; }

 private:
  Vector alpha_;
  double sum_;
};

/// First two moments of a Dirichlet distribution. The covariance is singular
/// along the all-ones direction (cov * 1 = 0).
struct DirichletMoments {
  SimplexVector mean;
  Matrix cov;
};

/// `count` i.i.d. Dir(alpha) draws as the rows of a count x k matrix.
/// Each row is a normalized vector of independent Gamma(alpha_n, 1) variates,
/// clamped to >= 1e-300 so downstream log() calls stay finite.
Matrix dirichlet_sample_rows(const DirichletParams& params, Index count, Rng& rng);

/// As dirichlet_sample_rows, but materialized as SimplexVector values.
std::vector<SimplexVector> dirichlet_sample(const DirichletParams& params, Index count, Rng& rng);

/// Fully normalized log density of Dir(alpha) at z, including the log
/// multivariate Beta normalizer. A zero coordinate with alpha_n < 1 throws
/// std::domain_error ("density singular at boundary"); with alpha_n > 1 the
/// density is zero there and -inf is returned.
double dirichlet_logpdf(const DirichletParams& params, const SimplexVector& z);

/// mean = alpha / (1'alpha), cov = (diag(mean) - mean mean') / (1'alpha + 1).
DirichletMoments dirichlet_moments(const DirichletParams& params);

/// Centering projection P = I - 11'/k: symmetric, idempotent, P1 = 0.
/// For any simplex vector z it satisfies P z = z - (1/k) 1.
Matrix centering_projection(Index k);

/// Euclidean projection of v onto the simplex (sort-and-threshold), followed
/// by clamping every entry to >= floor and renormalizing, so the result is
/// strictly interior and usable as a Dirichlet mean.
SimplexVector project_to_simplex(const Vector& v, double floor = 1e-6);

}  // namespace prism
