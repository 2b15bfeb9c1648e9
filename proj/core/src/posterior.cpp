#include "prism/posterior.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "prism/pinv.hpp"

namespace prism {

LmmseSolver::LmmseSolver(const MixingMatrix& h, const DirichletParams& prior,
                         const NoiseModel& noise) {
  if (h.cols() != prior.dim()) throw std::invalid_argument("LmmseSolver: dimension mismatch");
  const DirichletMoments pm = dirichlet_moments(prior);
  m_ = pm.mean.vec();
  hm_ = h * m_;

  const Matrix t = h * pm.cov;  // d x k, equals (C H')'
  Matrix s = h * t.transpose();
  s.diagonal().array() += noise.sigma2;
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("LmmseSolver: SPD factorization of HCH' + sigma2 I failed");
  gain_t_ = llt.solve(t).transpose();  // k x d

  cbar_ = pm.cov - gain_t_ * t;
  cbar_ = 0.5 * (cbar_ + cbar_.transpose().eval());  // enforce exact symmetry
  cbar_trace_ = cbar_.trace();
}

LmmseMoments LmmseSolver::moments(const Vector& y) const {
  return LmmseMoments{m_ + gain_t_ * (y - hm_), cbar_};
}

LmmseMoments lmmse_moments(const Vector& y, const MixingMatrix& h,
                           const DirichletParams& prior, const NoiseModel& noise) {
  return LmmseSolver(h, prior, noise).moments(y);
}

Proposal sisa_proposal(const DirichletParams& prior) { return PriorProposal{prior}; }

namespace {

Proposal build_lisa(const LmmseMoments& lm, double cbar_trace, const LisaOptions& opts) {
  const Index k = lm.mean.size();
  if (!(cbar_trace > 0.0))
    throw std::domain_error("lisa_proposal: degenerate covariance (Tr Cbar <= 0)");

  const SimplexVector m_tilde = project_to_simplex(lm.mean, opts.mean_floor);
  const Vector& mt = m_tilde.vec();

  // Trace-matching scale, kept strictly positive; the entrywise floor below
  // carries the alpha_floor requirement. Tying the clamp to min(m_tilde)
  // instead collapses the proposal variance far below Tr(Cbar) whenever the
  // projection clips a coordinate to the mean floor.
  double mu = (1.0 - mt.squaredNorm()) / cbar_trace - 1.0;
  const double mu_min = static_cast<double>(k) * opts.alpha_floor;
  bool mu_clamped = false;
  if (mu < mu_min) {
    mu = mu_min;
    mu_clamped = true;
  }

  Vector alpha_bar = mu * mt;
  bool alpha_floored = false;
  for (Index n = 0; n < k; ++n) {
    if (alpha_bar(n) < opts.alpha_floor) {
      alpha_bar(n) = opts.alpha_floor;
      alpha_floored = true;
    }
  }

  return LmmseDirichletProposal{DirichletParams(std::move(alpha_bar)), lm, mu,
                                m_tilde, mu_clamped, alpha_floored};
}

}  // namespace

Proposal lisa_proposal(const Vector& y, const MixingMatrix& h, const DirichletParams& prior,
                       const NoiseModel& noise, const LisaOptions& opts) {
  const LmmseSolver solver(h, prior, noise);
  return build_lisa(solver.moments(y), solver.error_cov_trace(), opts);
}

Proposal lisa_proposal(const Vector& y, const LmmseSolver& solver, const LisaOptions& opts) {
  return build_lisa(solver.moments(y), solver.error_cov_trace(), opts);
}

Proposal lisa_proposal(const LmmseMoments& moments, const LisaOptions& opts) {
  return build_lisa(moments, moments.cov.trace(), opts);
}

HighSnrLimits high_snr_limits(const MixingMatrix& h, Index k) {
  if (h.cols() != k) throw std::invalid_argument("high_snr_limits: k != H columns");
  require_full_column_rank(h, "high_snr_limits");
  const Matrix p = centering_projection(k);
  const Matrix hp = h * p;
  HighSnrLimits lim;
  lim.gain = pseudo_inverse(hp);
  lim.offset = (Matrix::Identity(k, k) - lim.gain * h) * Vector::Ones(k) / static_cast<double>(k);
  lim.cov_per_sigma2 = pseudo_inverse(p * h.transpose() * h * p);
  return lim;
}

RejectionResult truncated_gaussian_rejection(const LmmseMoments& moments, Index count,
                                             Index max_attempts, Rng& rng) {
  const Index k = moments.mean.size();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(moments.cov);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("truncated_gaussian_rejection: eigendecomposition failed");

  // Scaled eigenvector basis of the covariance; directions with negligible
  // variance (the all-ones null direction in particular) are dropped, which
  // keeps draws on the affine hull 1'z = 1.
  const double jitter = 1e-12;
  Matrix basis(k, k);
  Index cols = 0;
  for (Index i = 0; i < k; ++i) {
    const double lam = eig.eigenvalues()(i);
    if (lam > jitter) basis.col(cols++) = eig.eigenvectors().col(i) * std::sqrt(lam + jitter);
  }
  basis.conservativeResize(k, cols);

  Matrix accepted(count, k);
  Index n_accepted = 0;
  Index attempts = 0;
  NormalSampler normal;
  Vector xi(cols), z(k);
  while (n_accepted < count && attempts < max_attempts) {
    ++attempts;
    for (Index i = 0; i < cols; ++i) xi(i) = normal(rng);
    z = moments.mean + basis * xi;
    if ((z.array() >= 0.0).all() && std::abs(z.sum() - 1.0) < 1e-8)
      accepted.row(n_accepted++) = z.transpose();
  }
  accepted.conservativeResize(n_accepted, k);
  const double rate = attempts > 0 ? static_cast<double>(n_accepted) / static_cast<double>(attempts) : 0.0;
  return RejectionResult{std::move(accepted), rate, attempts};
}

double proposal_log_density(const Proposal& p, const SimplexVector& z) {
  return std::visit(
      [&z](const auto& prop) -> double {
        using T = std::decay_t<decltype(prop)>;
        if constexpr (std::is_same_v<T, PriorProposal>) {
          return dirichlet_logpdf(prop.alpha, z);
        } else if constexpr (std::is_same_v<T, LmmseDirichletProposal>) {
          return dirichlet_logpdf(prop.alpha_bar, z);
        } else {
          throw std::logic_error(
              "proposal_log_density: truncated Gaussian unsupported for weighting");
        }
      },
      p);
}

Matrix proposal_sample_rows(const Proposal& p, Index count, Rng& rng) {
  return std::visit(
      [count, &rng](const auto& prop) -> Matrix {
        using T = std::decay_t<decltype(prop)>;
        if constexpr (std::is_same_v<T, PriorProposal>) {
          return dirichlet_sample_rows(prop.alpha, count, rng);
        } else if constexpr (std::is_same_v<T, LmmseDirichletProposal>) {
          return dirichlet_sample_rows(prop.alpha_bar, count, rng);
        } else {
          RejectionResult r = truncated_gaussian_rejection(prop.moments, count, 1000 * count, rng);
          if (r.samples.rows() < count)
            throw std::runtime_error("proposal_sample_rows: rejection sampler starved");
          return std::move(r.samples);
        }
      },
      p);
}

const DirichletParams& proposal_dirichlet(const Proposal& p) {
  if (const auto* prior = std::get_if<PriorProposal>(&p)) return prior->alpha;
  if (const auto* lisa = std::get_if<LmmseDirichletProposal>(&p)) return lisa->alpha_bar;
  throw std::logic_error("proposal_dirichlet: truncated Gaussian has no concentration");
}

}  // namespace prism
