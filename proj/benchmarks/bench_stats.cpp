#include <benchmark/benchmark.h>

#include "cpikw/random.hpp"
#include "cpikw/stats.hpp"

using namespace cpikw;

namespace {

Eigen::MatrixXd random_matrix(long rows, long cols) {
  Rng rng(23);
  Eigen::MatrixXd x(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) x(i, j) = rng.gaussian();
  return x;
}

void BM_Pca(benchmark::State& state) {
  const Eigen::MatrixXd z = standardize(random_matrix(120, state.range(0))).z;
  for (auto _ : state) benchmark::DoNotOptimize(pca(z, 6, 0.70));
}
BENCHMARK(BM_Pca)->Arg(10)->Arg(40)->Arg(120);

void BM_Ols(benchmark::State& state) {
  const Eigen::MatrixXd x = random_matrix(120, state.range(0));
  const Eigen::VectorXd y = random_matrix(120, 1).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(ols(x, y));
}
BENCHMARK(BM_Ols)->Arg(2)->Arg(6)->Arg(12);

}  // namespace
