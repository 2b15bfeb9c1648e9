#include "prism/em.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace prism {

void EmConfig::validate() const {
  if (total_iterations < 0) throw std::invalid_argument("EmConfig: total_iterations < 0");
  if (switch_iteration < 0 || switch_iteration > total_iterations)
    throw std::invalid_argument("EmConfig: need 0 <= switch_iteration <= total_iterations");
  if (samples_per_obs < 1) throw std::invalid_argument("EmConfig: need samples_per_obs >= 1");
  if (ridge < 0.0) throw std::invalid_argument("EmConfig: ridge < 0");
  if (threads < 1) throw std::invalid_argument("EmConfig: threads < 1");
  if (backend == EstepBackend::Discrete && !discrete_prior.has_value())
    throw std::invalid_argument("EmConfig: Discrete backend needs a discrete prior");
}

namespace {

EstepBackend backend_for_iteration(const EmConfig& config, int iteration) {
  if (config.backend != EstepBackend::SisaThenLisa) return config.backend;
  return iteration < config.switch_iteration ? EstepBackend::Sisa : EstepBackend::Lisa;
}

struct PerObsBuffers {
  Matrix z_means;   // N x k
  Matrix zz_flat;   // N x k*k, row i is E[z z'|y_i] flattened
  Vector ess;       // N
  Vector elbo;      // N
  std::vector<std::uint8_t> mu_clamped;
  std::vector<std::uint8_t> alpha_floored;
};

}  // namespace

EStepStats e_step(const Dataset& data, const MixingMatrix& h_current, const EmConfig& config,
                  const DirichletParams& prior, const NoiseModel& noise,
                  std::uint64_t master_seed, int iteration) {
  config.validate();
  const Index n = data.n();
  const Index d = data.dim();
  const Index k = h_current.cols();
  if (h_current.rows() != d) throw std::invalid_argument("e_step: H rows != data dimension");
  if (prior.dim() != k) throw std::invalid_argument("e_step: prior dimension != H columns");

  const EstepBackend backend = backend_for_iteration(config, iteration);

  // Shared per-iteration state. The LMMSE factorization depends only on the
  // current H, so it is computed once, not per observation.
  std::optional<LmmseSolver> lmmse;
  if (backend == EstepBackend::Lisa) lmmse.emplace(h_current, prior, noise);
  std::optional<Proposal> sisa;
  if (backend == EstepBackend::Sisa) sisa = sisa_proposal(prior);

  // Gaussian backend: the posterior covariance is y-independent, so the gain
  // and the mean-independent part of the per-observation bound are shared.
  std::optional<GaussianPosterior> gauss_template;
  Matrix gauss_gain;  // k x d
  double gauss_elbo0 = 0.0;
  if (backend == EstepBackend::Gaussian) {
    gauss_template = gaussian_posterior_moments(Vector::Zero(d), h_current,
                                                config.gaussian_sigma_z2, noise);
    Matrix s = config.gaussian_sigma_z2 * (h_current * h_current.transpose());
    s.diagonal().array() += noise.sigma2;
    gauss_gain = config.gaussian_sigma_z2 *
                 Eigen::LLT<Matrix>(s).solve(h_current).transpose();
    const Eigen::LLT<Matrix> cov_llt(gauss_template->cov);
    double half_logdet = 0.0;
    for (Index i = 0; i < k; ++i) half_logdet += std::log(cov_llt.matrixL()(i, i));
    const double sz2 = config.gaussian_sigma_z2;
    // entropy of N(mean, cov) plus E[log N(z; 0, sz2 I)], mean part added per
    // observation below
    gauss_elbo0 = half_logdet + 0.5 * static_cast<double>(k) -
                  0.5 * static_cast<double>(k) * std::log(sz2) -
                  0.5 * gauss_template->cov.trace() / sz2;
  }

  PerObsBuffers buf;
  buf.z_means.resize(n, k);
  buf.zz_flat.resize(n, k * k);
  buf.ess.resize(n);
  buf.elbo.resize(n);
  buf.mu_clamped.assign(static_cast<std::size_t>(n), 0);
  buf.alpha_floored.assign(static_cast<std::size_t>(n), 0);

  std::atomic<Index> next{0};
  std::mutex err_mutex;
  std::string first_error;
  Index first_error_obs = -1;

  auto worker = [&]() {
    for (;;) {
      const Index i = next.fetch_add(1);
      if (i >= n) return;
      try {
        const Vector y = data.observations.row(i).transpose();
        PosteriorEstimate est;
        switch (backend) {
          case EstepBackend::Sisa: {
            Rng rng = make_rng(master_seed, {static_cast<std::uint64_t>(iteration),
                                             static_cast<std::uint64_t>(i)});
            est = importance_estimate(y, *sisa, h_current, prior, noise,
                                      config.samples_per_obs, rng);
            break;
          }
          case EstepBackend::Lisa: {
            Rng rng = make_rng(master_seed, {static_cast<std::uint64_t>(iteration),
                                             static_cast<std::uint64_t>(i)});
            const Proposal prop = lisa_proposal(y, *lmmse, config.lisa);
            const auto& ld = std::get<LmmseDirichletProposal>(prop);
            buf.mu_clamped[static_cast<std::size_t>(i)] = ld.mu_clamped ? 1 : 0;
            buf.alpha_floored[static_cast<std::size_t>(i)] = ld.alpha_floored ? 1 : 0;
            est = importance_estimate(y, prop, h_current, prior, noise,
                                      config.samples_per_obs, rng);
            break;
          }
          case EstepBackend::Gaussian: {
            est.z_mean = gauss_gain * y;
            est.zz_mean = gauss_template->cov + est.z_mean * est.z_mean.transpose();
            est.ess = std::numeric_limits<double>::quiet_NaN();
            est.sample_count = 0;
            est.elbo_term =
                gauss_elbo0 - 0.5 * est.z_mean.squaredNorm() / config.gaussian_sigma_z2;
            break;
          }
          case EstepBackend::Discrete:
            est = discrete_posterior_moments(y, h_current, noise, *config.discrete_prior);
            break;
          case EstepBackend::Oracle:
            est = brute_force_posterior(y, h_current, prior, noise,
                                        config.oracle_grid_resolution);
            break;
          case EstepBackend::SisaThenLisa:
            throw std::logic_error("e_step: unresolved schedule backend");
        }
        buf.z_means.row(i) = est.z_mean.transpose();
        buf.zz_flat.row(i) = Eigen::Map<const Vector>(est.zz_mean.data(), k * k).transpose();
        buf.ess(i) = est.ess;
        buf.elbo(i) = est.elbo_term;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (first_error_obs < 0 || i < first_error_obs) {
          first_error_obs = i;
          first_error = e.what();
        }
        return;
      }
    }
  };

  if (config.threads == 1 || n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int nthreads = std::min<int>(config.threads, static_cast<int>(n));
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error_obs >= 0)
    throw std::runtime_error("e_step: observation " + std::to_string(first_error_obs) + ": " +
                             first_error);

  // Ordered reductions; results do not depend on the worker count.
  EStepStats stats;
  stats.stat_a = data.observations.transpose() * buf.z_means;
  Eigen::RowVectorXd zz_sum = buf.zz_flat.colwise().sum();
  stats.stat_b = Eigen::Map<const Matrix>(zz_sum.data(), k, k);
  stats.stat_b = 0.5 * (stats.stat_b + stats.stat_b.transpose().eval());

  if (backend == EstepBackend::Gaussian) {
    stats.diag.mean_ess = std::numeric_limits<double>::quiet_NaN();
    stats.diag.min_ess = std::numeric_limits<double>::quiet_NaN();
  } else {
    stats.diag.mean_ess = buf.ess.mean();
    stats.diag.min_ess = buf.ess.minCoeff();
  }
  stats.diag.elbo_sum = buf.elbo.sum();
  for (Index i = 0; i < n; ++i) {
    stats.diag.mu_clamped_count += buf.mu_clamped[static_cast<std::size_t>(i)];
    stats.diag.alpha_floored_count += buf.alpha_floored[static_cast<std::size_t>(i)];
  }
  return stats;
}

MixingMatrix m_step(const Matrix& stat_a, const Matrix& stat_b, double ridge) {
  const Index k = stat_b.rows();
  if (stat_b.cols() != k || stat_a.cols() != k)
    throw std::invalid_argument("m_step: inconsistent statistic shapes");
  if ((stat_b - stat_b.transpose()).cwiseAbs().maxCoeff() >
      1e-8 * std::max(1.0, stat_b.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("m_step: stat_B is not symmetric");

  Matrix breg = 0.5 * (stat_b + stat_b.transpose());
  breg.diagonal().array() += ridge * breg.trace() / static_cast<double>(k);

  const Eigen::SelfAdjointEigenSolver<Matrix> eig(breg);
  const double lambda_min = eig.eigenvalues()(0);
  const double lambda_max = eig.eigenvalues()(k - 1);
  if (!(lambda_min > 0.0) || lambda_max / lambda_min > 1e14)
    throw std::runtime_error("m_step: stat_B numerically singular (smallest eigenvalue " +
                             std::to_string(lambda_min) + ")");

  const Eigen::LDLT<Matrix> ldlt(breg);
  MixingMatrix h = ldlt.solve(stat_a.transpose()).transpose();
  if (!h.allFinite()) throw std::runtime_error("m_step: non-finite solution");
  return h;
}

double q_value(const MixingMatrix& h, const Matrix& stat_a, const Matrix& stat_b,
               const NoiseModel& noise) {
  if (h.cols() != stat_b.rows() || h.rows() != stat_a.rows())
    throw std::invalid_argument("q_value: dimension mismatch");
  const double quad = (h * stat_b).cwiseProduct(h).sum();   // Tr(H' H stat_B)
  const double cross = h.cwiseProduct(stat_a).sum();        // Tr(H' stat_A)
  return (-0.5 / noise.sigma2) * (quad - 2.0 * cross);
}

EmRun run_em(const Dataset& data, const MixingMatrix& init, const EmConfig& config,
             const DirichletParams& prior, const NoiseModel& noise, std::uint64_t master_seed) {
  config.validate();
  if (init.rows() != data.dim()) throw std::invalid_argument("run_em: init rows != data dimension");
  if (init.cols() != prior.dim()) throw std::invalid_argument("run_em: init columns != prior dimension");

  EmRun run;
  run.state.h = init;
  for (int t = 0; t < config.total_iterations; ++t) {
    try {
      EStepStats stats = e_step(data, run.state.h, config, prior, noise, master_seed, t);
      MixingMatrix h_next = m_step(stats.stat_a, stats.stat_b, config.ridge);
      const double q =
          q_value(h_next, stats.stat_a, stats.stat_b, noise) + stats.diag.elbo_sum;
      const double denom = run.state.h.norm();
      const double change = (h_next - run.state.h).norm() / (denom > 0.0 ? denom : 1.0);

      run.state.h = std::move(h_next);
      run.state.iteration = t + 1;
      run.state.q_trace.push_back(q);
      run.state.stat_a = std::move(stats.stat_a);
      run.state.stat_b = std::move(stats.stat_b);
      run.trace.push_back(EmIterationRecord{t, q, stats.diag.mean_ess, change});

      if (config.early_stop_rel_tol > 0.0 && change < config.early_stop_rel_tol) break;
    } catch (const std::exception& e) {
      throw std::runtime_error("run_em: iteration " + std::to_string(t) + ": " + e.what());
    }
  }
  return run;
}

}  // namespace prism
