#include "prism/exact_esteps.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace prism {

DiscretePrior::DiscretePrior(Matrix atoms_) : atoms(std::move(atoms_)) {
  if (atoms.rows() < 1) throw std::invalid_argument("DiscretePrior: need at least one atom");
  if (!atoms.allFinite()) throw std::invalid_argument("DiscretePrior: non-finite atom");
}

GaussianPosterior gaussian_posterior_moments(const Vector& y, const MixingMatrix& h,
                                             double sigma_z2, const NoiseModel& noise) {
  if (y.size() != h.rows()) throw std::invalid_argument("gaussian_posterior_moments: dimension mismatch");
  if (!(sigma_z2 > 0.0)) throw std::invalid_argument("gaussian_posterior_moments: sigma_z2 must be positive");

  const Index k = h.cols();
  Matrix s = sigma_z2 * (h * h.transpose());
  s.diagonal().array() += noise.sigma2;
  const Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("gaussian_posterior_moments: factorization failed");
  const Matrix g = llt.solve(h);  // d x k, equals S^-1 H

  GaussianPosterior post;
  post.mean = sigma_z2 * (g.transpose() * y);
  post.cov = sigma_z2 * Matrix::Identity(k, k) - (sigma_z2 * sigma_z2) * (h.transpose() * g);
  post.cov = 0.5 * (post.cov + post.cov.transpose().eval());
  return post;
}

PosteriorEstimate discrete_posterior_moments(const Vector& y, const MixingMatrix& h,
                                             const NoiseModel& noise, const DiscretePrior& prior) {
  const Index j = prior.count();
  const Index k = prior.dim();
  const Vector loglik = log_likelihood_rows(y, h, noise, prior.atoms);

  // Bayes weights by log-sum-exp; the uniform 1/J prior cancels.
  const double mx = loglik.maxCoeff();
  if (!std::isfinite(mx)) throw DegenerateWeightsError(mx, j);
  Vector w(j);
  for (Index i = 0; i < j; ++i) w(i) = std::exp(loglik(i) - mx);
  w /= w.sum();

  PosteriorEstimate est;
  est.z_mean = prior.atoms.transpose() * w;
  est.zz_mean = Matrix::Zero(k, k);
  for (Index i = 0; i < j; ++i)
    est.zz_mean.noalias() += w(i) * (prior.atoms.row(i).transpose() * prior.atoms.row(i));
  est.zz_mean = 0.5 * (est.zz_mean + est.zz_mean.transpose().eval());

  double entropy = 0.0;
  for (Index i = 0; i < j; ++i)
    if (w(i) > 0.0) entropy -= w(i) * std::log(w(i));
  est.ess = std::exp(entropy);
  est.sample_count = j;
  // log p(y) = logsumexp(loglik) - log J under the uniform atom prior.
  est.elbo_term = mx + std::log((loglik.array() - mx).exp().sum()) -
                  std::log(static_cast<double>(j)) - w.dot(loglik);
  return est;
}

}  // namespace prism
