#pragma once

#include "prism/common.hpp"

namespace prism {

/// Moore-Penrose pseudo-inverse via SVD with the usual numerical-rank cutoff
/// max(rows, cols) * eps * sigma_max.
Matrix pseudo_inverse(const Matrix& m);

}  // namespace prism
