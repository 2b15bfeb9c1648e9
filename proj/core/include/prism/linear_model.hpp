#pragma once

#include <optional>

#include "prism/common.hpp"
#include "prism/rng.hpp"
#include "prism/simplex.hpp"

namespace prism {

/// Additive isotropic Gaussian noise with known variance sigma2 > 0.
struct NoiseModel {
  double sigma2;
  explicit NoiseModel(double s2);
};

/// Observations y_i (rows), with optional ground truth carried along for
/// evaluation: the latent rows z_i and the mixing matrix that generated them.
struct Dataset {
  Matrix observations;            // N x d
  std::optional<Matrix> latents;  // N x k, rows on the simplex
  std::optional<MixingMatrix> h_true;

  Index n() const { return observations.rows(); }
  Index dim() const { return observations.cols(); }
};

/// Smallest singular value of H below which operations requiring full column
/// rank refuse to proceed.
inline constexpr double kRankTol = 1e-8;

double smallest_singular_value(const Matrix& m);

/// Throws std::invalid_argument unless H is full column rank at kRankTol.
void require_full_column_rank(const MixingMatrix& h, const char* where);

/// Draws n samples of y = H z + w with z ~ Dir(alpha) and w ~ N(0, sigma2 I),
/// storing the latents and H as ground truth.
Dataset generate_data(const MixingMatrix& h, const DirichletParams& prior,
                      const NoiseModel& noise, Index n, Rng& rng);

/// log N(y; Hz, sigma2 I) = -|y - Hz|^2 / (2 sigma2) - (d/2) log(2 pi sigma2).
double log_likelihood_y_given_z(const Vector& y, const SimplexVector& z,
                                const MixingMatrix& h, const NoiseModel& noise);

/// Batch form: log N(y; H z_i, sigma2 I) for every row z_i of z_rows.
Vector log_likelihood_rows(const Vector& y, const MixingMatrix& h, const NoiseModel& noise,
                           const Matrix& z_rows);

/// Tr(H C H') / sigma2 with C the Dirichlet prior covariance.
double snr(const MixingMatrix& h, const DirichletParams& prior, const NoiseModel& noise);

/// Convenience: the same ratio in dB.
double snr_db(const MixingMatrix& h, const DirichletParams& prior, const NoiseModel& noise);

/// Noise variance that realizes a target SNR (in dB) for a given H and prior.
double sigma2_for_snr_db(const MixingMatrix& h, const DirichletParams& prior, double target_db);

/// d x k matrix with i.i.d. U[0,1] entries, redrawn (up to 100 attempts)
/// until full column rank at kRankTol.
MixingMatrix random_mixing_matrix(Index d, Index k, Rng& rng);

}  // namespace prism
