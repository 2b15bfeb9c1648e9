#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "prism/common.hpp"
#include "prism/estep.hpp"
#include "prism/exact_esteps.hpp"
#include "prism/linear_model.hpp"
#include "prism/posterior.hpp"

namespace prism {

/// E-step backend. Sisa/Lisa/SisaThenLisa are Monte Carlo (importance
/// sampling); Gaussian, Discrete and Oracle are exact and serve as test
/// references.
enum class EstepBackend { Sisa, Lisa, SisaThenLisa, Gaussian, Discrete, Oracle };

struct EmConfig {
  int total_iterations = 100;
  int switch_iteration = 50;  // SisaThenLisa: iterations [0, switch) use SISA
  Index samples_per_obs = 500;
  EstepBackend backend = EstepBackend::SisaThenLisa;
  double ridge = 1e-10;             // relative ridge added to stat_B in the M-step
  double early_stop_rel_tol = 0.0;  // stop when ||dH||_F/||H||_F falls below; 0 = off
  int threads = 1;                  // per-observation E-step workers

  double gaussian_sigma_z2 = 1.0;               // Gaussian backend
  Index oracle_grid_resolution = 200;           // Oracle backend (k <= 3)
  std::optional<DiscretePrior> discrete_prior;  // Discrete backend
  LisaOptions lisa;

  void validate() const;
};

struct EStepDiagnostics {
  double mean_ess = 0.0;  // NaN for the Gaussian backend (no weights involved)
  double min_ess = 0.0;
  double elbo_sum = 0.0;  // sum of per-observation PosteriorEstimate::elbo_term
  Index mu_clamped_count = 0;
  Index alpha_floored_count = 0;
};

struct EStepStats {
  Matrix stat_a;  // d x k: sum_i y_i E[z_i|y_i]'
  Matrix stat_b;  // k x k: sum_i E[z_i z_i'|y_i]
  EStepDiagnostics diag;
};

/// Accumulates the M-step sufficient statistics over all observations using
/// the configured backend. Deterministic for a fixed master seed: observation
/// i of iteration t draws from a substream derived from (seed, t, i), and the
/// reduction runs in observation order regardless of config.threads.
EStepStats e_step(const Dataset& data, const MixingMatrix& h_current, const EmConfig& config,
                  const DirichletParams& prior, const NoiseModel& noise,
                  std::uint64_t master_seed, int iteration);

/// Solves H (stat_B + ridge Tr(stat_B)/k I) = stat_A. Throws when the
/// regularized system is numerically singular, naming its smallest
/// eigenvalue.
MixingMatrix m_step(const Matrix& stat_a, const Matrix& stat_b, double ridge);

/// The H-dependent part of the EM surrogate objective:
/// (-1/2 sigma2) [Tr(H'H stat_B) - 2 Tr(H' stat_A)]. Additive terms that do
/// not involve H (observation norms, Gaussian normalizers, prior terms) are
/// dropped: only H is optimized and sigma2 is known.
double q_value(const MixingMatrix& h, const Matrix& stat_a, const Matrix& stat_b,
               const NoiseModel& noise);

struct EmIterationRecord {
  int iteration;
  double q_value;
  double mean_ess;
  double h_change;  // ||H_{t+1} - H_t||_F / ||H_t||_F
};

/// q_trace records, once per completed iteration, the post-M-step value of
/// the full EM surrogate: q_value(H_{t+1}; stats_t) plus the accumulated
/// elbo_term (conditional entropy and expected log-prior). Data-only
/// constants are dropped. With exact E-step backends this sequence is
/// non-decreasing; q_value alone is not, since the dropped q-dependent terms
/// move across iterations.
struct EmState {
  MixingMatrix h;
  int iteration = 0;
  std::vector<double> q_trace;
  Matrix stat_a;
  Matrix stat_b;
};

struct EmRun {
  EmState state;
  std::vector<EmIterationRecord> trace;
};

/// The EM outer loop: total_iterations of (e_step, m_step) from `init`.
/// Errors from either step are rethrown with the iteration index attached.
EmRun run_em(const Dataset& data, const MixingMatrix& init, const EmConfig& config,
             const DirichletParams& prior, const NoiseModel& noise, std::uint64_t master_seed);

}  // namespace prism
