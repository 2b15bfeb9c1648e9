#pragma once

#include "prism/common.hpp"
#include "prism/estep.hpp"
#include "prism/linear_model.hpp"

namespace prism {

/// Finite latent support {z_1..z_J} with uniform weights 1/J.
struct DiscretePrior {
  Matrix atoms;  // J x k
  explicit DiscretePrior(Matrix atoms_);
  Index count() const { return atoms.rows(); }
  Index dim() const { return atoms.cols(); }
};

/// Conditional mean and covariance of a Gaussian latent z ~ N(0, sigma_z2 I)
/// observed through y = Hz + w. Note cov[z|y] does not depend on y; callers
/// needing E[zz'|y] must add mean * mean'.
struct GaussianPosterior {
  Vector mean;
  Matrix cov;
};

GaussianPosterior gaussian_posterior_moments(const Vector& y, const MixingMatrix& h,
                                             double sigma_z2, const NoiseModel& noise);

/// Exact Bayes-rule moments over the finite support, computed with a
/// log-sum-exp over atoms. ess is exp(entropy) of the posterior atom weights.
PosteriorEstimate discrete_posterior_moments(const Vector& y, const MixingMatrix& h,
                                             const NoiseModel& noise, const DiscretePrior& prior);

}  // namespace prism
