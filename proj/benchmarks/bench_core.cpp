#include <benchmark/benchmark.h>

#include "prism/baselines.hpp"
#include "prism/em.hpp"
#include "prism/estep.hpp"
#include "prism/linear_model.hpp"
#include "prism/posterior.hpp"
#include "prism/simplex.hpp"

namespace {

using namespace prism;

void BM_DirichletSample(benchmark::State& state) {
  const Index k = state.range(0);
  const DirichletParams alpha(Vector::Constant(k, 1.0));
  Rng rng = make_rng(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dirichlet_sample_rows(alpha, 512, rng));
  }
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_DirichletSample)->Arg(4)->Arg(20);

void BM_DirichletSampleFractional(benchmark::State& state) {
  const Index k = state.range(0);
  Vector a = Vector::Constant(k, 2.5);
  a(0) = 0.04;  // one near-floor concentration, as LISA often produces
  const DirichletParams alpha(a);
  Rng rng = make_rng(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dirichlet_sample_rows(alpha, 512, rng));
  }
  state.SetItemsProcessed(state.iterations() * 512);
}
BENCHMARK(BM_DirichletSampleFractional)->Arg(4)->Arg(20);

struct EstepFixture {
  EstepFixture(Index d, Index k, double snr_db) : prior(Vector::Ones(k)) {
    Rng rng = make_rng(11);
    h = random_mixing_matrix(d, k, rng);
    sigma2 = sigma2_for_snr_db(h, prior, snr_db);
    Dataset data = generate_data(h, prior, NoiseModel(sigma2), 1, rng);
    y = data.observations.row(0).transpose();
  }
  DirichletParams prior;
  MixingMatrix h;
  double sigma2;
  Vector y;
};

void BM_ImportanceEstimateSisa(benchmark::State& state) {
  EstepFixture fx(state.range(0), state.range(1), 20.0);
  const Proposal prop = sisa_proposal(fx.prior);
  Rng rng = make_rng(13);
  const Index m = 500;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        importance_estimate(fx.y, prop, fx.h, fx.prior, NoiseModel(fx.sigma2), m, rng));
  }
  state.SetItemsProcessed(state.iterations() * m);
}
BENCHMARK(BM_ImportanceEstimateSisa)->Args({10, 4})->Args({50, 20});

void BM_ImportanceEstimateLisa(benchmark::State& state) {
  EstepFixture fx(state.range(0), state.range(1), 20.0);
  const NoiseModel noise(fx.sigma2);
  const LmmseSolver solver(fx.h, fx.prior, noise);
  Rng rng = make_rng(13);
  const Index m = 500;
  for (auto _ : state) {
    const Proposal prop = lisa_proposal(fx.y, solver);
    benchmark::DoNotOptimize(importance_estimate(fx.y, prop, fx.h, fx.prior, noise, m, rng));
  }
  state.SetItemsProcessed(state.iterations() * m);
}
BENCHMARK(BM_ImportanceEstimateLisa)->Args({10, 4})->Args({50, 20});

void BM_LmmseSolverBuild(benchmark::State& state) {
  EstepFixture fx(state.range(0), state.range(1), 20.0);
  const NoiseModel noise(fx.sigma2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(LmmseSolver(fx.h, fx.prior, noise));
  }
}
BENCHMARK(BM_LmmseSolverBuild)->Args({50, 20});

void BM_MStep(benchmark::State& state) {
  const Index d = 50, k = 20;
  Rng rng = make_rng(17);
  const MixingMatrix h = random_mixing_matrix(d, k, rng);
  const DirichletParams prior(Vector::Ones(k));
  const Matrix z = dirichlet_sample_rows(prior, 5000, rng);
  const Matrix a = (z * h.transpose()).transpose() * z;
  const Matrix b = z.transpose() * z;
  for (auto _ : state) {
    benchmark::DoNotOptimize(m_step(a, b, 1e-10));
  }
}
BENCHMARK(BM_MStep);

void BM_Vca(benchmark::State& state) {
  Rng rng = make_rng(19);
  const Index d = 50, k = 20;
  const MixingMatrix h = random_mixing_matrix(d, k, rng);
  const DirichletParams prior(Vector::Ones(k));
  const double sigma2 = sigma2_for_snr_db(h, prior, 20.0);
  const Dataset data = generate_data(h, prior, NoiseModel(sigma2), 5000, rng);
  for (auto _ : state) {
    Rng vca_rng = make_rng(23);
    benchmark::DoNotOptimize(vca(data, k, vca_rng));
  }
}
BENCHMARK(BM_Vca);

void BM_HungarianAssignment(benchmark::State& state) {
  const Index k = state.range(0);
  Rng rng = make_rng(29);
  Matrix cost(k, k);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j) cost(i, j) = uniform_open01(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_assignment(cost));
  }
}
BENCHMARK(BM_HungarianAssignment)->Arg(20);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
