#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "semlp/kernels.hpp"

namespace semlp::kernels::omp {

namespace {
// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::int64_t kParallelWork = 1 << 15;

std::int64_t as_index(std::size_t n) { return static_cast<std::int64_t>(n); }
} // namespace

void affine(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
    const std::int64_t batch = as_index(x.rows());
    const std::int64_t in = as_index(x.cols());
    const std::int64_t out = as_index(w.rows());
    const double* xp = x.data().data();
    const double* wp = w.data().data();
    double* yp = y.data().data();
#pragma omp parallel for collapse(2) schedule(static) if (batch * in * out >= kParallelWork)
    for (std::int64_t i = 0; i < batch; ++i) {
        for (std::int64_t j = 0; j < out; ++j) {
            const double* xr = xp + i * in;
            const double* wr = wp + j * in;
            double acc = 0.0;
            for (std::int64_t k = 0; k < in; ++k) {
                acc += xr[k] * wr[k];
            }
            yp[i * out + j] = acc + b[static_cast<std::size_t>(j)];
        }
    }
}

void accumulate_affine_grads(const Matrix& x, const Matrix& g, Matrix& gw, std::span<double> gb) {
    const std::int64_t batch = as_index(x.rows());
    const std::int64_t in = as_index(x.cols());
    const std::int64_t out = as_index(g.cols());
    const double* xp = x.data().data();
    const double* gp = g.data().data();
    double* gwp = gw.data().data();
    // Row-wise sweep over i keeps x reads contiguous; each gw[j,k] still sums its terms
    // in ascending i from zero, matching the reference bit for bit.
#pragma omp parallel if (batch * in * out >= kParallelWork)
    {
        std::vector<double> acc(static_cast<std::size_t>(in));
#pragma omp for schedule(static)
        for (std::int64_t j = 0; j < out; ++j) {
            std::fill(acc.begin(), acc.end(), 0.0);
            double bias_acc = 0.0;
            for (std::int64_t i = 0; i < batch; ++i) {
                const double gij = gp[i * out + j];
                const double* xr = xp + i * in;
                for (std::int64_t k = 0; k < in; ++k) {
                    acc[static_cast<std::size_t>(k)] += gij * xr[k];
                }
                bias_acc += gij;
            }
            for (std::int64_t k = 0; k < in; ++k) {
                gwp[j * in + k] += acc[static_cast<std::size_t>(k)];
            }
            gb[static_cast<std::size_t>(j)] += bias_acc;
        }
    }
}

void affine_input_grad(const Matrix& g, const Matrix& w, Matrix& dx) {
    const std::int64_t batch = as_index(g.rows());
    const std::int64_t out = as_index(g.cols());
    const std::int64_t in = as_index(w.cols());
    const double* gp = g.data().data();
    const double* wp = w.data().data();
    double* dxp = dx.data().data();
#pragma omp parallel for collapse(2) schedule(static) if (batch * in * out >= kParallelWork)
    for (std::int64_t i = 0; i < batch; ++i) {
        for (std::int64_t k = 0; k < in; ++k) {
            double acc = 0.0;
            for (std::int64_t j = 0; j < out; ++j) {
                acc += gp[i * out + j] * wp[j * in + k];
            }
            dxp[i * in + k] = acc;
        }
    }
}

void column_moments(const Matrix& x, std::span<double> mean, std::span<double> var) {
    const std::int64_t batch = as_index(x.rows());
    const std::int64_t cols = as_index(x.cols());
    const double* xp = x.data().data();
    const auto n = static_cast<double>(batch);
    // Columns are split into blocks; inside a block rows are swept contiguously. Every
    // column still accumulates in ascending row order.
    constexpr std::int64_t kBlock = 16;
    const std::int64_t blocks = (cols + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(static) if (batch * cols >= kParallelWork)
    for (std::int64_t blk = 0; blk < blocks; ++blk) {
        const std::int64_t lo = blk * kBlock;
        const std::int64_t hi = std::min(cols, lo + kBlock);
        double sum[kBlock] = {};
        double sq[kBlock] = {};
        for (std::int64_t i = 0; i < batch; ++i) {
            for (std::int64_t j = lo; j < hi; ++j) {
                sum[j - lo] += xp[i * cols + j];
            }
        }
        double mu[kBlock];
        for (std::int64_t j = lo; j < hi; ++j) {
            mu[j - lo] = sum[j - lo] / n;
        }
        for (std::int64_t i = 0; i < batch; ++i) {
            for (std::int64_t j = lo; j < hi; ++j) {
                const double d = xp[i * cols + j] - mu[j - lo];
                sq[j - lo] += d * d;
            }
        }
        for (std::int64_t j = lo; j < hi; ++j) {
            mean[static_cast<std::size_t>(j)] = mu[j - lo];
            var[static_cast<std::size_t>(j)] = sq[j - lo] / n;
        }
    }
}

void adamw_update(std::span<double> value, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, const AdamWHyper& h) {
    const std::int64_t n = as_index(value.size());
#pragma omp parallel for schedule(static) if (n >= kParallelWork)
    for (std::int64_t q = 0; q < n; ++q) {
        const auto p = static_cast<std::size_t>(q);
        m[p] = h.beta1 * m[p] + (1.0 - h.beta1) * grad[p];
        v[p] = h.beta2 * v[p] + (1.0 - h.beta2) * grad[p] * grad[p];
        const double m_hat = m[p] / h.bias_correction1;
        const double v_hat = v[p] / h.bias_correction2;
        const double theta = value[p];
        value[p] = theta - h.lr * (m_hat / (std::sqrt(v_hat) + h.epsilon)) - h.lr * h.weight_decay * theta;
    }
}

} // namespace semlp::kernels::omp
