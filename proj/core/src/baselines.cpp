#include "prism/baselines.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/SVD>

#include "prism/pinv.hpp"

namespace prism {

std::vector<Index> solve_assignment(const Matrix& cost) {
  const Index n = cost.rows();
  if (cost.cols() != n || n < 1) throw std::invalid_argument("solve_assignment: square matrix required");
  const double inf = std::numeric_limits<double>::infinity();

  // Hungarian method with potentials, shortest augmenting paths; 1-based
  // internal indexing with column 0 as the virtual start.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<Index> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Index> way(static_cast<std::size_t>(n) + 1, 0);

  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = p[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = -1;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<Index> assignment(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= n; ++j)
    assignment[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assignment;
}

MetricRecord permutation_mse(const MixingMatrix& h_true, const MixingMatrix& h_est) {
  if (h_true.rows() != h_est.rows() || h_true.cols() != h_est.cols())
    throw std::invalid_argument("permutation_mse: dimension mismatch");
  const Index k = h_true.cols();
  Matrix cost(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) cost(i, j) = (h_true.col(i) - h_est.col(j)).squaredNorm();

  MetricRecord rec;
  rec.permutation = solve_assignment(cost);
  rec.mse = 0.0;
  for (Index i = 0; i < k; ++i) rec.mse += cost(i, rec.permutation[static_cast<std::size_t>(i)]);
  return rec;
}

MixingMatrix vca(const Dataset& data, Index k, Rng& rng) {
  const Matrix& x = data.observations;
  const Index n = x.rows();
  const Index d = x.cols();
  if (k < 2) throw std::invalid_argument("vca: need k >= 2");
  if (n < k || d < k) throw std::invalid_argument("vca: need N >= k and d >= k");

  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (s(k - 1) <= 1e-10 * s(0)) throw std::runtime_error("vca: data rank below k");
  const Matrix subspace = svd.matrixV().leftCols(k);  // d x k
  const Matrix xp = x * subspace;                     // N x k

  Matrix a = Matrix::Zero(k, k);
  a(k - 1, 0) = 1.0;
  std::vector<Index> picked(static_cast<std::size_t>(k));
  NormalSampler normal;
  for (Index j = 0; j < k; ++j) {
    Vector f;
    double norm = 0.0;
    for (int attempt = 0; attempt < 64 && !(norm > 1e-12); ++attempt) {
      Vector w(k);
      for (Index t = 0; t < k; ++t) w(t) = normal(rng);
      f = w - a * (pseudo_inverse(a) * w);
      norm = f.norm();
    }
    if (!(norm > 1e-12)) throw std::runtime_error("vca: could not find a search direction");
    f /= norm;

    Index imax = 0;
    (xp * f).cwiseAbs().maxCoeff(&imax);
    picked[static_cast<std::size_t>(j)] = imax;
    a.col(j) = xp.row(imax).transpose();
  }

  MixingMatrix h(d, k);
  for (Index j = 0; j < k; ++j) h.col(j) = x.row(picked[static_cast<std::size_t>(j)]).transpose();
  return h;
}

}  // namespace prism
