#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prism/common.hpp"
#include "prism/linear_model.hpp"
#include "prism/rng.hpp"

namespace prism {

/// One evaluation result: the permutation-aligned MSE between a true and an
/// estimated mixing matrix, plus the run coordinates used by the CSV schema.
struct MetricRecord {
  double mse = 0.0;
  std::vector<Index> permutation;  // permutation[i] = estimated column matched to true column i
  std::string method;
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  Index n_samples = 0;  // observations N
  Index m_samples = 0;  // importance samples M (0 when not applicable)
};

/// Exact minimum-cost assignment (Hungarian method, O(k^3)) on a square cost
/// matrix; returns assignment[row] = column.
std::vector<Index> solve_assignment(const Matrix& cost);

/// MSE over the best column permutation:
/// min over pi of sum_i |H_i - Hhat_{pi(i)}|^2, solved exactly.
MetricRecord permutation_mse(const MixingMatrix& h_true, const MixingMatrix& h_est);

/// Vertex component analysis, SVD-subspace variant: observations are
/// projected onto the top-k right-singular subspace of the data matrix, and k
/// observations are selected iteratively, each maximizing |f' x| for a random
/// direction f orthogonal to the span of the already-selected vertices.
/// Returns the selected observations as the columns of Hhat.
MixingMatrix vca(const Dataset& data, Index k, Rng& rng);

}  // namespace prism
