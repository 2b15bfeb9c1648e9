#include <doctest.h>

#include <cmath>
#include <functional>

#include <Eigen/Eigenvalues>

#include "prism/estep.hpp"
#include "test_util.hpp"

using namespace prism;
using prism::test::max_abs;
using prism::test::median;

namespace {

struct SmallModel {
  MixingMatrix h;
  DirichletParams prior;
  NoiseModel noise;
  Vector y;
};

SmallModel small_model(Index d, Index k, double snr_target_db, Rng& rng) {
  const MixingMatrix h = random_mixing_matrix(d, k, rng);
  const DirichletParams prior(Vector::Ones(k));
  const NoiseModel noise(sigma2_for_snr_db(h, prior, snr_target_db));
  Dataset data = generate_data(h, prior, noise, 1, rng);
  return SmallModel{h, prior, noise, data.observations.row(0).transpose()};
}

// Adaptive Simpson on [a,b]; independent 1-d integrator for the k = 2 oracle.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fb, double fm, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * eps) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, fm, flm, 0.5 * eps, depth - 1) +
         adaptive_simpson(f, m, b, fm, fb, frm, 0.5 * eps, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double eps) {
  const double m = 0.5 * (a + b);
  return adaptive_simpson(f, a, b, f(a), f(b), f(m), eps, 40);
}

}  // namespace

TEST_CASE("effective_sample_size") {
  SUBCASE("uniform weights give M") {
    CHECK(effective_sample_size(Vector::Constant(8, 1.0 / 8.0)) ==
          doctest::Approx(8.0).epsilon(1e-12));
  }
  SUBCASE("one-hot weights give 1") {
    Vector w = Vector::Zero(5);
    w(2) = 1.0;
    CHECK(effective_sample_size(w) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("(1/2, 1/4, 1/4) gives 8/3") {
    CHECK(effective_sample_size((Vector(3) << 0.5, 0.25, 0.25).finished()) ==
          doctest::Approx(8.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("rejects unnormalized or negative input") {
    CHECK_THROWS_AS(effective_sample_size((Vector(2) << 0.5, 0.4).finished()),
                    std::invalid_argument);
    CHECK_THROWS_AS(effective_sample_size((Vector(2) << 1.5, -0.5).finished()),
                    std::invalid_argument);
  }
}

TEST_CASE("normalize_log_weights") {
  SUBCASE("invariant to adding a constant") {
    Rng rng = make_rng(41);
    Vector logw = 5.0 * test::random_gaussian_vector(100, rng);
    const Vector base = normalize_log_weights(logw);
    const Vector shifted = normalize_log_weights(logw.array() + 123.456);
    CHECK((base - shifted).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("entries far below the max flush to exact zero") {
    const Vector w = normalize_log_weights((Vector(3) << 0.0, -800.0, -0.5).finished());
    CHECK(w(1) == 0.0);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("all -inf raises the degenerate-weights error") {
    const double ninf = -std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(normalize_log_weights(Vector::Constant(4, ninf)), DegenerateWeightsError);
  }
}

TEST_CASE("importance_estimate") {
  SUBCASE("a single sample dominates regardless of its weight") {
    Rng model_rng = make_rng(42);
    const SmallModel model = small_model(4, 3, 10.0, model_rng);
    const Proposal prop = sisa_proposal(model.prior);
    Rng rng_a = make_rng(7), rng_b = make_rng(7);
    const Matrix draw = dirichlet_sample_rows(model.prior, 1, rng_a);
    const PosteriorEstimate est =
        importance_estimate(model.y, prop, model.h, model.prior, model.noise, 1, rng_b);
    CHECK((est.z_mean - draw.row(0).transpose()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(max_abs(est.zz_mean - draw.row(0).transpose() * draw.row(0)) < 1e-15);
    CHECK(est.ess == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("proposal equal to the posterior gives uniform weights") {
    // Huge noise: the posterior collapses to the prior, which is the SISA
    // proposal, so all weights agree up to rounding.
    Rng model_rng = make_rng(43);
    const SmallModel base = small_model(4, 3, 10.0, model_rng);
    const NoiseModel huge(1e12);
    Rng rng = make_rng(9);
    const PosteriorEstimate est = importance_estimate(
        base.y, sisa_proposal(base.prior), base.h, base.prior, huge, 5000, rng);
    CHECK(est.ess > 0.9999 * 5000);
  }

  SUBCASE("uniform weights exactly, via the shared weighting path") {
    Rng rng = make_rng(44);
    const Matrix samples = dirichlet_sample_rows(DirichletParams(Vector::Ones(3)), 64, rng);
    const PosteriorEstimate est =
        weighted_posterior_from_samples(samples, Vector::Constant(64, -3.25));
    CHECK(est.ess == doctest::Approx(64.0).epsilon(1e-12));
    CHECK((est.z_mean - samples.colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("posterior-estimate invariants hold") {
    Rng rng = make_rng(45);
    for (int rep = 0; rep < 10; ++rep) {
      const SmallModel model = small_model(5, 3, 10.0, rng);
      const PosteriorEstimate est = importance_estimate(
          model.y, sisa_proposal(model.prior), model.h, model.prior, model.noise, 2000, rng);
      CHECK(est.z_mean.minCoeff() > -1e-6);
      CHECK(std::abs(est.z_mean.sum() - 1.0) < 1e-6);
      CHECK(max_abs(est.zz_mean - est.zz_mean.transpose()) < 1e-8);
      CHECK(est.zz_mean.trace() <= 1.0 + 1e-8);
      CHECK((est.zz_mean * Vector::Ones(3) - est.z_mean).cwiseAbs().maxCoeff() < 1e-6);
      const Matrix second_central = est.zz_mean - est.z_mean * est.z_mean.transpose();
      CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(second_central).eigenvalues()(0) > -1e-8);
      CHECK(est.ess > 0.0);
      CHECK(est.ess <= 2000.0 + 1e-9);
    }
  }

  SUBCASE("SISA matches the quadrature oracle at k = 3") {
    Rng rng = make_rng(46);
    const MixingMatrix h = random_mixing_matrix(5, 3, rng);
    const DirichletParams prior(Vector::Ones(3));
    const NoiseModel noise(sigma2_for_snr_db(h, prior, 10.0));
    const Dataset data = generate_data(h, prior, noise, 9, rng);
    std::vector<double> errs;
    for (Index i = 0; i < data.n(); ++i) {
      const Vector y = data.observations.row(i).transpose();
      const PosteriorEstimate oracle = brute_force_posterior(y, h, prior, noise, 200);
      Rng est_rng = make_rng(100 + static_cast<std::uint64_t>(i));
      const PosteriorEstimate is =
          importance_estimate(y, sisa_proposal(prior), h, prior, noise, 100000, est_rng);
      errs.push_back((is.z_mean - oracle.z_mean).cwiseAbs().maxCoeff());
    }
    CHECK(median(errs) < 0.01);
  }

  SUBCASE("estimator error shrinks as the sample count grows") {
    Rng rng = make_rng(47);
    const MixingMatrix h = random_mixing_matrix(4, 3, rng);
    const DirichletParams prior(Vector::Ones(3));
    const NoiseModel noise(sigma2_for_snr_db(h, prior, 10.0));
    const Dataset data = generate_data(h, prior, noise, 1, rng);
    const Vector y = data.observations.row(0).transpose();
    const PosteriorEstimate oracle = brute_force_posterior(y, h, prior, noise, 300);

    double prev_median = std::numeric_limits<double>::infinity();
    for (Index m : {100, 1000, 10000, 100000}) {
      std::vector<double> errs;
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng est_rng = make_rng(seed, {static_cast<std::uint64_t>(m)});
        const PosteriorEstimate est =
            importance_estimate(y, sisa_proposal(prior), h, prior, noise, m, est_rng);
        errs.push_back((est.z_mean - oracle.z_mean).cwiseAbs().maxCoeff());
      }
      const double med = median(errs);
      CHECK(med < prev_median);
      prev_median = med;
    }
  }

  SUBCASE("LISA has at least the SISA effective sample size at high SNR") {
    Rng rng = make_rng(48);
    const MixingMatrix h = random_mixing_matrix(5, 3, rng);
    const DirichletParams prior(Vector::Ones(3));
    const NoiseModel noise(sigma2_for_snr_db(h, prior, 20.0));
    const Dataset data = generate_data(h, prior, noise, 50, rng);
    const LmmseSolver solver(h, prior, noise);
    std::vector<double> ess_sisa, ess_lisa;
    for (Index i = 0; i < data.n(); ++i) {
      const Vector y = data.observations.row(i).transpose();
      Rng rng_a = make_rng(7, {static_cast<std::uint64_t>(i)});
      Rng rng_b = make_rng(7, {static_cast<std::uint64_t>(i)});
      ess_sisa.push_back(
          importance_estimate(y, sisa_proposal(prior), h, prior, noise, 1000, rng_a).ess);
      ess_lisa.push_back(
          importance_estimate(y, lisa_proposal(y, solver), h, prior, noise, 1000, rng_b).ess);
    }
    CHECK(median(ess_lisa) >= median(ess_sisa));
  }

  SUBCASE("all-underflow weights raise the degenerate error") {
    const MixingMatrix h = Matrix::Identity(2, 2);
    const DirichletParams prior(Vector::Ones(2));
    const Vector y = (Vector(2) << 100.0, -100.0).finished();
    Rng rng = make_rng(49);
    CHECK_THROWS_AS(
        importance_estimate(y, sisa_proposal(prior), h, prior, NoiseModel(1e-308), 100, rng),
        DegenerateWeightsError);
  }

  SUBCASE("truncated Gaussian proposals cannot be weighted") {
    Rng rng = make_rng(50);
    const SmallModel model = small_model(4, 3, 10.0, rng);
    const Proposal trunc =
        TruncatedGaussianProposal{lmmse_moments(model.y, model.h, model.prior, model.noise)};
    CHECK_THROWS_AS(
        importance_estimate(model.y, trunc, model.h, model.prior, model.noise, 10, rng),
        std::logic_error);
  }
}

TEST_CASE("brute_force_posterior") {
  SUBCASE("huge noise returns the prior mean") {
    Rng rng = make_rng(51);
    const MixingMatrix h = random_mixing_matrix(4, 3, rng);
    const DirichletParams prior((Vector(3) << 2.0, 1.0, 1.0).finished());
    const Vector y = test::random_gaussian_vector(4, rng);
    const PosteriorEstimate est = brute_force_posterior(y, h, prior, NoiseModel(1e12), 200);
    const Vector prior_mean = dirichlet_moments(prior).mean.vec();
    CHECK((est.z_mean - prior_mean).cwiseAbs().maxCoeff() < 1e-3);
  }

  SUBCASE("k = 2 agrees with an adaptive 1-d integrator") {
    Rng rng = make_rng(52);
    const MixingMatrix h = random_mixing_matrix(3, 2, rng);
    const DirichletParams prior((Vector(2) << 2.0, 3.0).finished());
    const NoiseModel noise(0.05);
    const Dataset data = generate_data(h, prior, noise, 1, rng);
    const Vector y = data.observations.row(0).transpose();

    auto posterior_kernel = [&](double z1) {
      const SimplexVector z((Vector(2) << z1, 1.0 - z1).finished());
      return std::exp(log_likelihood_y_given_z(y, z, h, noise) + dirichlet_logpdf(prior, z));
    };
    const double norm = integrate(posterior_kernel, 0.0, 1.0, 1e-13);
    const double first = integrate([&](double z1) { return z1 * posterior_kernel(z1); }, 0.0,
                                   1.0, 1e-13);
    const PosteriorEstimate est = brute_force_posterior(y, h, prior, noise, 50000);
    CHECK(std::abs(est.z_mean(0) - first / norm) < 1e-8);
    CHECK(est.ess == doctest::Approx(50000.0));
  }

  SUBCASE("zz_mean rows sum to z_mean") {
    Rng rng = make_rng(53);
    const MixingMatrix h = random_mixing_matrix(5, 3, rng);
    const DirichletParams prior(Vector::Ones(3));
    const NoiseModel noise(0.1);
    const Vector y = test::random_gaussian_vector(5, rng);
    const PosteriorEstimate est = brute_force_posterior(y, h, prior, noise, 150);
    CHECK((est.zz_mean * Vector::Ones(3) - est.z_mean).cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("k > 3 is rejected") {
    const MixingMatrix h = Matrix::Identity(4, 4);
    const DirichletParams prior(Vector::Ones(4));
    CHECK_THROWS_AS(brute_force_posterior(Vector::Zero(4), h, prior, NoiseModel(1.0), 50),
                    std::invalid_argument);
  }
}
