#include "prism/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace prism {

namespace {
constexpr double kZFloor = 1e-300;  // keeps log(z) finite after Gamma underflow
}

SimplexVector::SimplexVector(Vector v) : v_(std::move(v)) {
  if (v_.size() < 1) throw std::invalid_argument("SimplexVector: empty vector");
  if (!v_.allFinite()) throw std::invalid_argument("SimplexVector: non-finite entry");
  if ((v_.array() < 0.0).any()) throw std::invalid_argument("SimplexVector: negative entry");
  if (std::abs(v_.sum() - 1.0) > kSimplexSumTol)
    throw std::invalid_argument("SimplexVector: entries do not sum to 1");
}

DirichletParams::DirichletParams(Vector alpha) : alpha_(std::move(alpha)) {
  if (alpha_.size() < 2) throw std::invalid_argument("DirichletParams: need k >= 2");
  if (!alpha_.allFinite() || (alpha_.array() <= 0.0).any())
    throw std::invalid_argument("DirichletParams: alpha must be positive and finite");
  sum_ = alpha_.sum();
}

Matrix dirichlet_sample_rows(const DirichletParams& params, Index count, Rng& rng) {
  if (count < 1) throw std::invalid_argument("dirichlet_sample: count must be positive");
  const Index k = params.dim();
  Matrix z(count, k);
  NormalSampler normal;
  for (Index n = 0; n < k; ++n) {
    const double shape = params.alpha()(n);
    for (Index i = 0; i < count; ++i) {
      z(i, n) = std::max(gamma_draw(shape, rng, normal), kZFloor);
    }
  }
  z.array().colwise() /= z.rowwise().sum().array();
  return z;
}

std::vector<SimplexVector> dirichlet_sample(const DirichletParams& params, Index count, Rng& rng) {
  const Matrix rows = dirichlet_sample_rows(params, count, rng);
  std::vector<SimplexVector> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) out.push_back(SimplexVector::unchecked(rows.row(i).transpose()));
  return out;
}

double dirichlet_logpdf(const DirichletParams& params, const SimplexVector& z) {
  const Vector& a = params.alpha();
  if (z.size() != params.dim())
    throw std::invalid_argument("dirichlet_logpdf: dimension mismatch");
  double log_beta = -std::lgamma(params.sum());
  for (Index n = 0; n < a.size(); ++n) log_beta += std::lgamma(a(n));
  double s = 0.0;
  for (Index n = 0; n < a.size(); ++n) {
    const double an = a(n);
    if (an == 1.0) continue;  // z_n^0 contributes nothing, even at the boundary
    const double zn = z[n];
    if (zn <= 0.0) {
      if (an < 1.0) throw std::domain_error("dirichlet_logpdf: density singular at boundary");
      return -std::numeric_limits<double>::infinity();
    }
    s += (an - 1.0) * std::log(zn);
  }
  return s - log_beta;
}

DirichletMoments dirichlet_moments(const DirichletParams& params) {
  const Vector m = params.alpha() / params.sum();
  Matrix cov = (Matrix(m.asDiagonal()) - m * m.transpose()) / (params.sum() + 1.0);
  return DirichletMoments{SimplexVector::unchecked(m), std::move(cov)};
}

Matrix centering_projection(Index k) {
  if (k < 2) throw std::invalid_argument("centering_projection: need k >= 2");
  Matrix p = Matrix::Identity(k, k);
  p.array() -= 1.0 / static_cast<double>(k);
  return p;
}

SimplexVector project_to_simplex(const Vector& v, double floor) {
  const Index k = v.size();
  if (k < 2) throw std::invalid_argument("project_to_simplex: need k >= 2");
  if (!(floor > 0.0) || floor >= 1.0 / static_cast<double>(k))
    throw std::invalid_argument("project_to_simplex: floor must lie in (0, 1/k)");

  // Sort-and-threshold Euclidean projection onto {z >= 0, 1'z = 1}.
  std::vector<double> u(v.data(), v.data() + k);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0;
  double tau = 0.0;
  for (Index j = 0; j < k; ++j) {
    cum += u[static_cast<std::size_t>(j)];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - t > 0.0) tau = t;
  }
  Vector z = (v.array() - tau).max(0.0);

  z = z.array().max(floor);
  z /= z.sum();
  return SimplexVector::unchecked(std::move(z));
}

}  // namespace prism
