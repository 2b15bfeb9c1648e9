#include "prism/estep.hpp"

#include <cmath>
#include <limits>

namespace prism {

namespace {

constexpr double kFlushGap = 700.0;  // log-weights further below the max are flushed to zero

double log_multivariate_beta(const DirichletParams& p) {
  double s = -std::lgamma(p.sum());
  for (Index n = 0; n < p.dim(); ++n) s += std::lgamma(p.alpha()(n));
  return s;
}

Vector dirichlet_logpdf_rows(const DirichletParams& p, const Matrix& z) {
  const Vector expo = p.alpha().array() - 1.0;
  return (z.array().log().matrix() * expo).array() - log_multivariate_beta(p);
}

double log_sum_exp(const Vector& v) {
  const double mx = v.maxCoeff();
  if (!std::isfinite(mx)) return mx;
  return mx + std::log((v.array() - mx).exp().sum());
}

PosteriorEstimate weighted_moments(const Matrix& sample_rows, const Vector& w) {
  PosteriorEstimate est;
  est.z_mean = sample_rows.transpose() * w;
  const Matrix weighted = sample_rows.array().colwise() * w.array();
  est.zz_mean = sample_rows.transpose() * weighted;
  est.zz_mean = 0.5 * (est.zz_mean + est.zz_mean.transpose().eval());
  est.ess = 1.0 / w.squaredNorm();
  est.sample_count = sample_rows.rows();
  return est;
}

}  // namespace

DegenerateWeightsError::DegenerateWeightsError(double max_log_weight_, Index sample_count_)
    : std::runtime_error("degenerate weights: all importance weights underflowed (max log weight " +
                         std::to_string(max_log_weight_) + " over " +
                         std::to_string(sample_count_) + " samples)"),
      max_log_weight(max_log_weight_),
      sample_count(sample_count_) {}

double effective_sample_size(const Vector& normalized_weights) {
  if ((normalized_weights.array() < 0.0).any())
    throw std::invalid_argument("effective_sample_size: negative weight");
  if (std::abs(normalized_weights.sum() - 1.0) > 1e-8)
    throw std::invalid_argument("effective_sample_size: weights must sum to 1");
  return 1.0 / normalized_weights.squaredNorm();
}

Vector normalize_log_weights(const Vector& log_weights) {
  const Index m = log_weights.size();
  if (m < 1) throw std::invalid_argument("normalize_log_weights: empty");
  if ((log_weights.array().isNaN()).any())
    throw std::runtime_error("normalize_log_weights: NaN log weight");

  const double mx = log_weights.maxCoeff();
  Vector w(m);
  if (mx == std::numeric_limits<double>::infinity()) {
    // Mass concentrates on the singular entries in the limit.
    for (Index i = 0; i < m; ++i)
      w(i) = (log_weights(i) == mx) ? 1.0 : 0.0;
  } else {
    if (mx == -std::numeric_limits<double>::infinity()) throw DegenerateWeightsError(mx, m);
    for (Index i = 0; i < m; ++i)
      w(i) = (log_weights(i) < mx - kFlushGap) ? 0.0 : std::exp(log_weights(i) - mx);
  }
  return w / w.sum();
}

PosteriorEstimate weighted_posterior_from_samples(const Matrix& sample_rows,
                                                  const Vector& log_weights) {
  if (sample_rows.rows() != log_weights.size())
    throw std::invalid_argument("weighted_posterior_from_samples: row/weight count mismatch");
  return weighted_moments(sample_rows, normalize_log_weights(log_weights));
}

PosteriorEstimate importance_estimate(const Vector& y, const Proposal& proposal,
                                      const MixingMatrix& h, const DirichletParams& prior,
                                      const NoiseModel& noise, Index m, Rng& rng) {
  if (m < 1) throw std::invalid_argument("importance_estimate: need m >= 1");
  if (y.size() != h.rows() || h.cols() != prior.dim())
    throw std::invalid_argument("importance_estimate: dimension mismatch");

  const DirichletParams& q = proposal_dirichlet(proposal);
  const Matrix z = dirichlet_sample_rows(q, m, rng);

  const Vector loglik = log_likelihood_rows(y, h, noise, z);
  Vector logw = loglik;
  const Vector delta = prior.alpha() - q.alpha();
  if ((delta.array() != 0.0).any()) {
    // log p(z) - log q(z) collapses to one product with the exponent gap.
    logw.noalias() += z.array().log().matrix() * delta;
    logw.array() += log_multivariate_beta(q) - log_multivariate_beta(prior);
  }
  const Vector w = normalize_log_weights(logw);
  PosteriorEstimate est = weighted_moments(z, w);
  // log of the self-normalized marginal estimate, minus the expected
  // log-likelihood under the weighted posterior.
  est.elbo_term = log_sum_exp(logw) - std::log(static_cast<double>(m)) - w.dot(loglik);
  return est;
}

PosteriorEstimate brute_force_posterior(const Vector& y, const MixingMatrix& h,
                                        const DirichletParams& prior, const NoiseModel& noise,
                                        Index grid_resolution) {
  const Index k = prior.dim();
  if (k > 3) throw std::invalid_argument("brute_force_posterior: tractable only for k <= 3");
  if (y.size() != h.rows() || h.cols() != k)
    throw std::invalid_argument("brute_force_posterior: dimension mismatch");
  if (grid_resolution < 2) throw std::invalid_argument("brute_force_posterior: grid too coarse");

  const Index r = grid_resolution;
  const double hstep = 1.0 / static_cast<double>(r);
  Matrix nodes;
  if (k == 2) {
    nodes.resize(r, 2);
    for (Index i = 0; i < r; ++i) {
      const double z1 = (static_cast<double>(i) + 0.5) * hstep;
      nodes(i, 0) = z1;
      nodes(i, 1) = 1.0 - z1;
    }
  } else {
    // Centroids of the triangulation cells: r^2 equal-area cells in total,
    // all strictly interior.
    nodes.resize(r * r, 3);
    Index idx = 0;
    for (Index i = 0; i < r; ++i) {
      for (Index j = 0; i + j < r; ++j) {
        nodes(idx, 0) = (static_cast<double>(i) + 1.0 / 3.0) * hstep;
        nodes(idx, 1) = (static_cast<double>(j) + 1.0 / 3.0) * hstep;
        nodes(idx, 2) = 1.0 - nodes(idx, 0) - nodes(idx, 1);
        ++idx;
      }
    }
    for (Index i = 0; i < r; ++i) {
      for (Index j = 0; i + j < r - 1; ++j) {
        nodes(idx, 0) = (static_cast<double>(i) + 2.0 / 3.0) * hstep;
        nodes(idx, 1) = (static_cast<double>(j) + 2.0 / 3.0) * hstep;
        nodes(idx, 2) = 1.0 - nodes(idx, 0) - nodes(idx, 1);
        ++idx;
      }
    }
  }

  // Equal-weight cells, so the quadrature reduces to a softmax over nodes.
  const Vector loglik = log_likelihood_rows(y, h, noise, nodes);
  const Vector logw = loglik + dirichlet_logpdf_rows(prior, nodes);
  const Vector w = normalize_log_weights(logw);
  PosteriorEstimate est = weighted_moments(nodes, w);
  est.ess = static_cast<double>(nodes.rows());
  // Quadrature estimate of log p(y), with the cell measure restoring the
  // continuous normalization; k = 2 cells are intervals, k = 3 half-squares.
  const double log_cell = k == 2 ? std::log(hstep) : std::log(0.5 * hstep * hstep);
  est.elbo_term = log_sum_exp(logw) + log_cell - w.dot(loglik);
  return est;
}

}  // namespace prism
