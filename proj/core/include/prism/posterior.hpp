#pragma once

#include <variant>

#include "prism/common.hpp"
#include "prism/linear_model.hpp"
#include "prism/rng.hpp"
#include "prism/simplex.hpp"

namespace prism {

/// Gaussian conditional moments of z given y under the linear model with the
/// prior replaced by its first two moments: the LMMSE mean and error
/// covariance. The covariance inherits the prior's singularity along 1.
struct LmmseMoments {
  Vector mean;  // mbar(y), length k
  Matrix cov;   // Cbar, k x k, PSD, Cbar 1 = 0
};

/// Amortizes the parts of the LMMSE computation that do not depend on y:
/// the SPD factorization of H C H' + sigma2 I, the resulting gain, and the
/// (y-independent) error covariance. One instance per (H, prior, noise).
class LmmseSolver {
 public:
  LmmseSolver(const MixingMatrix& h, const DirichletParams& prior, const NoiseModel& noise);

  LmmseMoments moments(const Vector& y) const;

  const Matrix& error_cov() const noexcept { return cbar_; }
  double error_cov_trace() const noexcept { return cbar_trace_; }
  const Vector& prior_mean() const noexcept { return m_; }

 private:
  Vector m_;        // prior mean
  Vector hm_;       // H m
  Matrix gain_t_;   // k x d, the LMMSE gain C H' (H C H' + sigma2 I)^-1
  Matrix cbar_;     // error covariance
  double cbar_trace_;
};

/// One-shot form of the LMMSE moments.
LmmseMoments lmmse_moments(const Vector& y, const MixingMatrix& h,
                           const DirichletParams& prior, const NoiseModel& noise);

/// Surrogate equal to the prior: q(z|y) = Dir(z; alpha).
struct PriorProposal {
  DirichletParams alpha;
};

/// Dirichlet surrogate moment-matched to the LMMSE estimate:
/// alpha_bar = mu * m_tilde with m_tilde the simplex projection of mbar(y)
/// and mu chosen so that Tr cov matches Tr Cbar (clamped when the formula
/// would produce a non-positive or too-small concentration).
struct LmmseDirichletProposal {
  DirichletParams alpha_bar;
  LmmseMoments lmmse;
  double mu;
  SimplexVector m_tilde;
  bool mu_clamped;      // the trace-matching mu hit its lower bound
  bool alpha_floored;   // some alpha_bar entry was raised to the floor
};

/// The truncated Gaussian N(mbar, Cbar) restricted to the simplex; sampling
/// only (its normalizer is unknown, so it cannot be used for weighting).
struct TruncatedGaussianProposal {
  LmmseMoments moments;
};

using Proposal = std::variant<PriorProposal, LmmseDirichletProposal, TruncatedGaussianProposal>;

/// SISA: the proposal is the prior itself.
Proposal sisa_proposal(const DirichletParams& prior);

struct LisaOptions {
  double mean_floor = 1e-6;   // strict-interior floor applied by the simplex projection
  double alpha_floor = 1e-3;  // smallest admissible concentration entry
};

/// LISA: Dirichlet surrogate with mean constraint E[z] = m_tilde(y) and trace
/// constraint Tr cov = Tr Cbar. Throws std::domain_error when Tr Cbar <= 0.
Proposal lisa_proposal(const Vector& y, const MixingMatrix& h, const DirichletParams& prior,
                       const NoiseModel& noise, const LisaOptions& opts = {});

/// As lisa_proposal but reusing a prepared LmmseSolver (one factorization per
/// EM iteration instead of one per observation).
Proposal lisa_proposal(const Vector& y, const LmmseSolver& solver, const LisaOptions& opts = {});

/// Builds the Dirichlet surrogate directly from precomputed LMMSE moments.
Proposal lisa_proposal(const LmmseMoments& moments, const LisaOptions& opts = {});

/// Vanishing-noise limits of the LMMSE moments for full-column-rank H:
/// gain -> (HP)+, offset v_H = (1/k)(I - (HP)+ H) 1, and the error covariance
/// per unit sigma2, (P H'H P)+.
struct HighSnrLimits {
  Matrix gain;            // k x d
  Vector offset;          // v_H
  Matrix cov_per_sigma2;  // multiply by sigma2 to get the Cbar limit

  Vector mean_limit(const Vector& y) const { return gain * y + offset; }
};

HighSnrLimits high_snr_limits(const MixingMatrix& h, Index k);

struct RejectionResult {
  Matrix samples;          // accepted x k, rows on the simplex
  double acceptance_rate;  // accepted / attempts, in [0,1]
  Index attempts;
};

/// Reference sampler for the truncated Gaussian: draws from N(mbar, Cbar)
/// restricted to the affine hull {1'z = 1} (eigendecomposition of Cbar with
/// jitter 1e-12) and keeps draws with all entries >= 0. May return fewer than
/// `count` samples; an empty result with rate 0 is a valid outcome.
RejectionResult truncated_gaussian_rejection(const LmmseMoments& moments, Index count,
                                             Index max_attempts, Rng& rng);

/// Normalized log q(z|y). Throws std::logic_error for the truncated Gaussian
/// variant ("unsupported for weighting").
double proposal_log_density(const Proposal& p, const SimplexVector& z);

/// `count` draws from the proposal as matrix rows. The truncated Gaussian
/// variant samples by rejection and throws if it cannot fill the request
/// within 1000 * count attempts.
Matrix proposal_sample_rows(const Proposal& p, Index count, Rng& rng);

/// Concentration vector of a Dirichlet-backed proposal; throws for the
/// truncated Gaussian variant.
const DirichletParams& proposal_dirichlet(const Proposal& p);

}  // namespace prism
