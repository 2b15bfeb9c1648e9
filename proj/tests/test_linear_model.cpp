#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "prism/linear_model.hpp"
#include "test_util.hpp"

using namespace prism;

namespace {

// Independent reference: generic multivariate normal log density with an
// explicit Cholesky log-determinant, evaluated at covariance sigma2 I.
double mvn_logpdf_reference(const Vector& x, const Vector& mean, const Matrix& cov) {
  const Eigen::LLT<Matrix> llt(cov);
  const Vector solved = llt.solve(x - mean);
  double logdet = 0.0;
  for (Index i = 0; i < cov.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return -0.5 * ((x - mean).dot(solved) + logdet +
                 static_cast<double>(x.size()) * std::log(2.0 * M_PI));
}

}  // namespace

TEST_CASE("NoiseModel rejects non-positive variance") {
  CHECK_THROWS_AS(NoiseModel(0.0), std::invalid_argument);
  CHECK_THROWS_AS(NoiseModel(-1.0), std::invalid_argument);
  CHECK_NOTHROW(NoiseModel(1e-30));
}

TEST_CASE("generate_data") {
  SUBCASE("full-scale shapes") {
    Rng rng = make_rng(1);
    const MixingMatrix h = random_mixing_matrix(50, 20, rng);
    const Dataset data = generate_data(h, DirichletParams(Vector::Ones(20)), NoiseModel(0.1),
                                       5000, rng);
    CHECK(data.observations.rows() == 5000);
    CHECK(data.observations.cols() == 50);
    REQUIRE(data.latents.has_value());
    CHECK(data.latents->rows() == 5000);
    CHECK(data.latents->cols() == 20);
    REQUIRE(data.h_true.has_value());
    for (Index i = 0; i < 50; ++i) {
      CHECK(data.latents->row(i).minCoeff() >= 0.0);
      CHECK(std::abs(data.latents->row(i).sum() - 1.0) <= kSimplexSumTol);
    }
  }

  SUBCASE("noiseless limit stays in the column hull") {
    Rng rng = make_rng(2);
    const MixingMatrix h = random_mixing_matrix(6, 3, rng);
    const Dataset data =
        generate_data(h, DirichletParams(Vector::Ones(3)), NoiseModel(1e-30), 200, rng);
    for (Index i = 0; i < data.n(); ++i) {
      const Vector hull_point = h * data.latents->row(i).transpose();
      CHECK((data.observations.row(i).transpose() - hull_point).norm() < 1e-10);
    }
  }

  SUBCASE("empirical mean of y is H m within 3 SE") {
    Rng rng = make_rng(3);
    const MixingMatrix h = random_mixing_matrix(3, 2, rng);
    const DirichletParams prior((Vector(2) << 2.0, 1.0).finished());
    const Index n = 1'000'000;
    const Dataset data = generate_data(h, prior, NoiseModel(0.05), n, rng);
    const Vector expected = h * dirichlet_moments(prior).mean.vec();
    for (Index c = 0; c < 3; ++c) {
      const double mean = data.observations.col(c).mean();
      const double sd = std::sqrt((data.observations.col(c).array() - mean).square().sum() /
                                  static_cast<double>(n - 1));
      CHECK(std::abs(mean - expected(c)) < 3.0 * sd / std::sqrt(static_cast<double>(n)));
    }
  }

  SUBCASE("empirical covariance of y is H C H' + sigma2 I within 3 SE") {
    Rng rng = make_rng(4);
    const MixingMatrix h = random_mixing_matrix(3, 2, rng);
    const DirichletParams prior((Vector(2) << 1.0, 1.5).finished());
    const NoiseModel noise(0.02);
    const Index n = 1'000'000;
    const Dataset data = generate_data(h, prior, noise, n, rng);
    const Matrix c = dirichlet_moments(prior).cov;
    Matrix expected = h * c * h.transpose();
    expected.diagonal().array() += noise.sigma2;
    const Vector mu = h * dirichlet_moments(prior).mean.vec();
    for (Index a = 0; a < 3; ++a) {
      for (Index b = a; b < 3; ++b) {
        const Eigen::ArrayXd prod = (data.observations.col(a).array() - mu(a)) *
                                    (data.observations.col(b).array() - mu(b));
        const double mean = prod.mean();
        const double sd = std::sqrt((prod - mean).square().sum() / static_cast<double>(n - 1));
        CHECK(std::abs(mean - expected(a, b)) < 3.0 * sd / std::sqrt(static_cast<double>(n)));
      }
    }
  }

  SUBCASE("same seed reproduces bit-exactly") {
    Rng h_rng = make_rng(5);
    const MixingMatrix h = random_mixing_matrix(4, 3, h_rng);
    Rng rng_a = make_rng(99), rng_b = make_rng(99);
    const DirichletParams prior(Vector::Ones(3));
    const Dataset a = generate_data(h, prior, NoiseModel(0.1), 500, rng_a);
    const Dataset b = generate_data(h, prior, NoiseModel(0.1), 500, rng_b);
    CHECK(a.observations == b.observations);
    CHECK(*a.latents == *b.latents);
  }

  SUBCASE("dimension mismatch rejected") {
    Rng rng = make_rng(6);
    const MixingMatrix h = random_mixing_matrix(4, 3, rng);
    CHECK_THROWS_AS(generate_data(h, DirichletParams(Vector::Ones(2)), NoiseModel(1.0), 10, rng),
                    std::invalid_argument);
  }
}

TEST_CASE("log_likelihood_y_given_z") {
  SUBCASE("zero residual with unit normalizer") {
    // d = 1, sigma2 = 1/(2 pi): the Gaussian normalizer is exactly 1.
    const MixingMatrix h = Matrix::Constant(1, 2, 0.5);
    const SimplexVector z((Vector(2) << 0.5, 0.5).finished());
    const Vector y = h * z.vec();
    CHECK(log_likelihood_y_given_z(y, z, h, NoiseModel(1.0 / (2.0 * M_PI))) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("unit residual at d = 2, sigma2 = 1") {
    const MixingMatrix h = Matrix::Zero(2, 2);
    const SimplexVector z((Vector(2) << 0.5, 0.5).finished());
    const Vector y = (Vector(2) << 1.0, 0.0).finished();
    CHECK(log_likelihood_y_given_z(y, z, h, NoiseModel(1.0)) ==
          doctest::Approx(-0.5 - std::log(2.0 * M_PI)).epsilon(1e-12));
  }

  SUBCASE("monotone decreasing in the residual norm") {
    Rng rng = make_rng(7);
    const MixingMatrix h = random_mixing_matrix(3, 2, rng);
    const SimplexVector z((Vector(2) << 0.3, 0.7).finished());
    const Vector direction = test::random_gaussian_vector(3, rng).normalized();
    double prev = std::numeric_limits<double>::infinity();
    for (double scale : {0.0, 0.5, 1.0, 2.0, 4.0}) {
      const double ll =
          log_likelihood_y_given_z(h * z.vec() + scale * direction, z, h, NoiseModel(0.7));
      CHECK(ll < prev + 1e-15);
      prev = ll;
    }
  }

  SUBCASE("matches the generic multivariate normal density") {
    Rng rng = make_rng(8);
    for (int rep = 0; rep < 100; ++rep) {
      const Index d = 2 + static_cast<Index>(rng() % 5);
      const Index k = 2 + static_cast<Index>(rng() % 3);
      const MixingMatrix h = random_mixing_matrix(std::max(d, k), k, rng).topRows(d);
      const DirichletParams prior(test::random_alpha(k, rng));
      const SimplexVector z = dirichlet_sample(prior, 1, rng)[0];
      const Vector y = test::random_gaussian_vector(d, rng);
      const double sigma2 = 0.1 + uniform_open01(rng);
      const double expected =
          mvn_logpdf_reference(y, h * z.vec(), sigma2 * Matrix::Identity(d, d));
      CHECK(log_likelihood_y_given_z(y, z, h, NoiseModel(sigma2)) ==
            doctest::Approx(expected).epsilon(1e-10));
    }
  }

  SUBCASE("batch form agrees with the scalar form") {
    Rng rng = make_rng(9);
    const MixingMatrix h = random_mixing_matrix(5, 3, rng);
    const DirichletParams prior(Vector::Ones(3));
    const Matrix z = dirichlet_sample_rows(prior, 20, rng);
    const Vector y = test::random_gaussian_vector(5, rng);
    const Vector batch = log_likelihood_rows(y, h, NoiseModel(0.3), z);
    for (Index i = 0; i < z.rows(); ++i) {
      const SimplexVector zi = SimplexVector::unchecked(z.row(i).transpose());
      CHECK(batch(i) == doctest::Approx(log_likelihood_y_given_z(y, zi, h, NoiseModel(0.3)))
                            .epsilon(1e-12));
    }
  }
}

TEST_CASE("snr") {
  Rng rng = make_rng(10);
  const MixingMatrix h = random_mixing_matrix(4, 3, rng);
  const DirichletParams prior(test::random_alpha(3, rng));

  SUBCASE("doubling the noise halves the ratio") {
    CHECK(snr(h, prior, NoiseModel(0.4)) ==
          doctest::Approx(2.0 * snr(h, prior, NoiseModel(0.8))).epsilon(1e-12));
  }

  SUBCASE("zero mixing matrix gives zero") {
    CHECK(snr(Matrix::Zero(4, 3), prior, NoiseModel(1.0)) == 0.0);
  }

  SUBCASE("identity H at alpha = (1,1), sigma2 = 1/12 gives 2") {
    const DirichletParams uniform(Vector::Ones(2));
    CHECK(snr(Matrix::Identity(2, 2), uniform, NoiseModel(1.0 / 12.0)) ==
          doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("sigma2_for_snr_db inverts snr_db") {
    const double sigma2 = sigma2_for_snr_db(h, prior, 17.5);
    CHECK(snr_db(h, prior, NoiseModel(sigma2)) == doctest::Approx(17.5).epsilon(1e-10));
  }
}

TEST_CASE("random_mixing_matrix") {
  SUBCASE("full-scale draw is full rank with entries in [0,1]") {
    Rng rng = make_rng(11);
    const MixingMatrix h = random_mixing_matrix(50, 20, rng);
    CHECK(h.rows() == 50);
    CHECK(h.cols() == 20);
    CHECK(h.minCoeff() >= 0.0);
    CHECK(h.maxCoeff() <= 1.0);
    CHECK(smallest_singular_value(h) > kRankTol);
  }

  SUBCASE("entry mean is about one half") {
    Rng rng = make_rng(12);
    double sum = 0.0;
    const int reps = 200;
    for (int rep = 0; rep < reps; ++rep) sum += random_mixing_matrix(10, 4, rng).mean();
    CHECK(std::abs(sum / reps - 0.5) < 0.01);
  }

  SUBCASE("same seed is bit-exact") {
    Rng rng_a = make_rng(13), rng_b = make_rng(13);
    CHECK(random_mixing_matrix(8, 5, rng_a) == random_mixing_matrix(8, 5, rng_b));
  }

  SUBCASE("rejects d < k") {
    Rng rng = make_rng(14);
    CHECK_THROWS_AS(random_mixing_matrix(3, 4, rng), std::invalid_argument);
  }
}
