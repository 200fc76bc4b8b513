// Serial reference kernels against their OpenMP counterparts. Sizes span a training
// mini-batch (32 rows), a full-dataset eval pass and a large synthetic batch; the OpenMP
// versions only fork above a work threshold, so small sizes measure that overhead.
#include <vector>

#include <benchmark/benchmark.h>

#include "semlp/kernels.hpp"
#include "semlp/rng.hpp"

namespace {

using semlp::Matrix;
namespace kr = semlp::kernels::reference;
namespace ko = semlp::kernels::omp;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    semlp::Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.data()) {
        v = rng.uniform(-1.0, 1.0);
    }
    return m;
}

template <auto Affine>
void bm_affine(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const Matrix x = random_matrix(rows, 64, 1);
    const Matrix w = random_matrix(64, 64, 2);
    const std::vector<double> b(64, 0.1);
    Matrix y(rows, 64);
    for (auto _ : state) {
        Affine(x, w, b, y);
        benchmark::DoNotOptimize(y.data().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * 64 * 64));
}

template <auto Grads>
void bm_affine_grads(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const Matrix x = random_matrix(rows, 64, 3);
    const Matrix g = random_matrix(rows, 64, 4);
    Matrix gw(64, 64);
    std::vector<double> gb(64);
    for (auto _ : state) {
        Grads(x, g, gw, gb);
        benchmark::DoNotOptimize(gw.data().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * 64 * 64));
}

template <auto InputGrad>
void bm_input_grad(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const Matrix g = random_matrix(rows, 64, 5);
    const Matrix w = random_matrix(64, 64, 6);
    Matrix dx(rows, 64);
    for (auto _ : state) {
        InputGrad(g, w, dx);
        benchmark::DoNotOptimize(dx.data().data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * 64 * 64));
}

template <auto Moments>
void bm_moments(benchmark::State& state) {
    const auto rows = static_cast<std::size_t>(state.range(0));
    const Matrix x = random_matrix(rows, 64, 7);
    std::vector<double> mean(64);
    std::vector<double> var(64);
    for (auto _ : state) {
        Moments(x, mean, var);
        benchmark::DoNotOptimize(var.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows * 64));
}

template <auto Update>
void bm_adamw(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix p0 = random_matrix(1, n, 8);
    const Matrix g = random_matrix(1, n, 9);
    std::vector<double> value(p0.data().begin(), p0.data().end());
    std::vector<double> m(n);
    std::vector<double> v(n);
    const semlp::kernels::AdamWHyper h{};
    for (auto _ : state) {
        Update(value, g.data(), m, v, h);
        benchmark::DoNotOptimize(value.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}

void rows_args(benchmark::internal::Benchmark* b) { b->Arg(32)->Arg(864)->Arg(16384); }

} // namespace

BENCHMARK(bm_affine<kr::affine>)->Name("affine/reference")->Apply(rows_args);
BENCHMARK(bm_affine<ko::affine>)->Name("affine/omp")->Apply(rows_args);
BENCHMARK(bm_affine_grads<kr::accumulate_affine_grads>)->Name("affine_grads/reference")->Apply(rows_args);
BENCHMARK(bm_affine_grads<ko::accumulate_affine_grads>)->Name("affine_grads/omp")->Apply(rows_args);
BENCHMARK(bm_input_grad<kr::affine_input_grad>)->Name("input_grad/reference")->Apply(rows_args);
BENCHMARK(bm_input_grad<ko::affine_input_grad>)->Name("input_grad/omp")->Apply(rows_args);
BENCHMARK(bm_moments<kr::column_moments>)->Name("column_moments/reference")->Apply(rows_args);
BENCHMARK(bm_moments<ko::column_moments>)->Name("column_moments/omp")->Apply(rows_args);
BENCHMARK(bm_adamw<kr::adamw_update>)->Name("adamw/reference")->Arg(13000)->Arg(1 << 20);
BENCHMARK(bm_adamw<ko::adamw_update>)->Name("adamw/omp")->Arg(13000)->Arg(1 << 20);

BENCHMARK_MAIN();
