#pragma once

#include <stdexcept>

#include "prism/common.hpp"
#include "prism/linear_model.hpp"
#include "prism/posterior.hpp"
#include "prism/rng.hpp"
#include "prism/simplex.hpp"

namespace prism {

/// Per-observation conditional-moment estimate: E[z|y], E[zz'|y], and the
/// effective sample size of the weights that produced it.
///
/// elbo_term is the q-dependent completion of the per-observation EM
/// surrogate: entropy of the represented posterior plus its expected
/// log-prior (equivalently log p(y) minus the expected log-likelihood).
/// Adding it to the expected complete log-likelihood gives the evidence
/// bound, whose post-M-step trace is non-decreasing for exact posteriors.
/// Model-aware producers fill it; the generic weighting path leaves it 0.
struct PosteriorEstimate {
  Vector z_mean;    // length k
  Matrix zz_mean;   // k x k, symmetric PSD, zz_mean 1 = z_mean
  double ess;       // in (0, sample_count]
  Index sample_count;
  double elbo_term = 0.0;
};

/// All importance weights underflowed to -inf; carries what was seen.
struct DegenerateWeightsError : std::runtime_error {
  DegenerateWeightsError(double max_log_weight_, Index sample_count_);
  double max_log_weight;
  Index sample_count;
};

/// 1 / sum(w^2) for normalized weights (w >= 0, sum w = 1); lies in (0, M].
double effective_sample_size(const Vector& normalized_weights);

/// Softmax-normalizes log weights after subtracting the max; entries more
/// than 700 below the max are flushed to exact zero. Throws
/// DegenerateWeightsError when every entry is -inf.
Vector normalize_log_weights(const Vector& log_weights);

/// Weighted moments of the given sample rows under softmax(log_weights).
/// This is the weighting path shared by importance_estimate and by exact
/// finite-support posteriors (both reduce to the same softmax).
PosteriorEstimate weighted_posterior_from_samples(const Matrix& sample_rows,
                                                  const Vector& log_weights);

/// Normalized importance sampling of E[z|y] and E[zz'|y]: draws m samples
/// from the proposal, weights them by p(y|z) p(z) / q(z|y) in log space, and
/// softmax-normalizes. The proposal must support log densities (Dirichlet
/// variants only).
PosteriorEstimate importance_estimate(const Vector& y, const Proposal& proposal,
                                      const MixingMatrix& h, const DirichletParams& prior,
                                      const NoiseModel& noise, Index m, Rng& rng);

/// Deterministic grid quadrature of the posterior moments, tractable for
/// k <= 3 only; the independent oracle for the Monte Carlo estimator.
/// Uses a midpoint rule on a barycentric grid of spacing 1/grid_resolution
/// (nodes strictly interior, so boundary-singular densities are safe).
/// ess reports the grid size.
PosteriorEstimate brute_force_posterior(const Vector& y, const MixingMatrix& h,
                                        const DirichletParams& prior, const NoiseModel& noise,
                                        Index grid_resolution = 200);

}  // namespace prism
