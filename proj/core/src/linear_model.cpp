#include "prism/linear_model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

namespace prism {

NoiseModel::NoiseModel(double s2) : sigma2(s2) {
  if (!(s2 > 0.0) || !std::isfinite(s2))
    throw std::invalid_argument("NoiseModel: sigma2 must be positive and finite");
}

double smallest_singular_value(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues().tail(1)(0);
}

void require_full_column_rank(const MixingMatrix& h, const char* where) {
  if (h.rows() < h.cols())
    throw std::invalid_argument(std::string(where) + ": need d >= k");
  if (smallest_singular_value(h) <= kRankTol)
    throw std::invalid_argument(std::string(where) + ": H is column rank deficient");
}

Dataset generate_data(const MixingMatrix& h, const DirichletParams& prior,
                      const NoiseModel& noise, Index n, Rng& rng) {
  const Index d = h.rows();
  const Index k = h.cols();
  if (k != prior.dim()) throw std::invalid_argument("generate_data: prior dimension != H columns");
  if (n < 1) throw std::invalid_argument("generate_data: need n >= 1");

  const Matrix z = dirichlet_sample_rows(prior, n, rng);
  Matrix w(n, d);
  NormalSampler normal;
  const double sd = std::sqrt(noise.sigma2);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) w(i, j) = sd * normal(rng);

  Dataset data;
  data.observations = z * h.transpose() + w;
  data.latents = z;
  data.h_true = h;
  return data;
}

double log_likelihood_y_given_z(const Vector& y, const SimplexVector& z,
                                const MixingMatrix& h, const NoiseModel& noise) {
  if (y.size() != h.rows() || z.size() != h.cols())
    throw std::invalid_argument("log_likelihood_y_given_z: dimension mismatch");
  const double r2 = (y - h * z.vec()).squaredNorm();
  const double d = static_cast<double>(y.size());
  return -r2 / (2.0 * noise.sigma2) - 0.5 * d * std::log(2.0 * M_PI * noise.sigma2);
}

Vector log_likelihood_rows(const Vector& y, const MixingMatrix& h, const NoiseModel& noise,
                           const Matrix& z_rows) {
  if (y.size() != h.rows() || z_rows.cols() != h.cols())
    throw std::invalid_argument("log_likelihood_rows: dimension mismatch");
  Matrix residual = z_rows * h.transpose();
  residual.rowwise() -= y.transpose();
  const double d = static_cast<double>(y.size());
  return (-0.5 / noise.sigma2) * residual.rowwise().squaredNorm().array() -
         0.5 * d * std::log(2.0 * M_PI * noise.sigma2);
}

double snr(const MixingMatrix& h, const DirichletParams& prior, const NoiseModel& noise) {
  if (h.cols() != prior.dim()) throw std::invalid_argument("snr: dimension mismatch");
  const Matrix c = dirichlet_moments(prior).cov;
  const double signal = (h * c).cwiseProduct(h).sum();  // Tr(H C H')
  return signal / noise.sigma2;
}

double snr_db(const MixingMatrix& h, const DirichletParams& prior, const NoiseModel& noise) {
  return 10.0 * std::log10(snr(h, prior, noise));
}

double sigma2_for_snr_db(const MixingMatrix& h, const DirichletParams& prior, double target_db) {
  const Matrix c = dirichlet_moments(prior).cov;
  const double signal = (h * c).cwiseProduct(h).sum();
  if (!(signal > 0.0)) throw std::invalid_argument("sigma2_for_snr_db: Tr(HCH') must be positive");
  return signal / std::pow(10.0, target_db / 10.0);
}

MixingMatrix random_mixing_matrix(Index d, Index k, Rng& rng) {
  if (d < k || k < 2) throw std::invalid_argument("random_mixing_matrix: need d >= k >= 2");
  for (int attempt = 0; attempt < 100; ++attempt) {
    MixingMatrix h(d, k);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < k; ++j) h(i, j) = uniform_open01(rng);
    if (smallest_singular_value(h) > kRankTol) return h;
  }
  throw std::runtime_error("random_mixing_matrix: persistent rank deficiency");
}

}  // namespace prism
