#pragma once

#include <cstddef>
#include <span>

#include "semlp/matrix.hpp"

// Numerical inner loops of the network. Every kernel exists twice: a plain serial
// reference and an OpenMP version. Both compute each output element in the same
// summation order, so their results are bitwise identical; the tests hold them to
// that and the benchmark compares their speed.
namespace semlp::kernels {

struct AdamWHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-4;
    double bias_correction1 = 1.0; // 1 - beta1^t
    double bias_correction2 = 1.0; // 1 - beta2^t
};

#define SEMLP_KERNEL_DECLS                                                                      \
    /* y[i,j] = sum_k x[i,k] * w[j,k] + b[j]; y must be x.rows() x w.rows(). */                 \
    void affine(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y);        \
    /* gw[j,k] += sum_i g[i,j] * x[i,k];  gb[j] += sum_i g[i,j]. */                              \
    void accumulate_affine_grads(const Matrix& x, const Matrix& g, Matrix& gw,                  \
                                 std::span<double> gb);                                         \
    /* dx[i,k] = sum_j g[i,j] * w[j,k]. */                                                      \
    void affine_input_grad(const Matrix& g, const Matrix& w, Matrix& dx);                       \
    /* Per-column mean and biased variance. */                                                  \
    void column_moments(const Matrix& x, std::span<double> mean, std::span<double> var);        \
    /* One decoupled-weight-decay Adam update over a flat parameter block. */                   \
    void adamw_update(std::span<double> value, std::span<const double> grad,                    \
                      std::span<double> m, std::span<double> v, const AdamWHyper& h);

namespace reference {
SEMLP_KERNEL_DECLS
} // namespace reference

namespace omp {
SEMLP_KERNEL_DECLS
} // namespace omp

#undef SEMLP_KERNEL_DECLS

// The network calls these.
using omp::accumulate_affine_grads;
using omp::adamw_update;
using omp::affine;
using omp::affine_input_grad;
using omp::column_moments;

} // namespace semlp::kernels
