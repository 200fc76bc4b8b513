#include <cmath>

#include "semlp/kernels.hpp"

namespace semlp::kernels::reference {

void affine(const Matrix& x, const Matrix& w, std::span<const double> b, Matrix& y) {
    const std::size_t batch = x.rows();
    const std::size_t in = x.cols();
    const std::size_t out = w.rows();
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < out; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < in; ++k) {
                acc += x(i, k) * w(j, k);
            }
            y(i, j) = acc + b[j];
        }
    }
}

void accumulate_affine_grads(const Matrix& x, const Matrix& g, Matrix& gw, std::span<double> gb) {
    const std::size_t batch = x.rows();
    const std::size_t in = x.cols();
    const std::size_t out = g.cols();
    for (std::size_t j = 0; j < out; ++j) {
        for (std::size_t k = 0; k < in; ++k) {
            double acc = 0.0;
            for (std::size_t i = 0; i < batch; ++i) {
                acc += g(i, j) * x(i, k);
            }
            gw(j, k) += acc;
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < batch; ++i) {
            acc += g(i, j);
        }
        gb[j] += acc;
    }
}

void affine_input_grad(const Matrix& g, const Matrix& w, Matrix& dx) {
    const std::size_t batch = g.rows();
    const std::size_t out = g.cols();
    const std::size_t in = w.cols();
    for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t k = 0; k < in; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < out; ++j) {
                acc += g(i, j) * w(j, k);
            }
            dx(i, k) = acc;
        }
    }
}

void column_moments(const Matrix& x, std::span<double> mean, std::span<double> var) {
    const std::size_t batch = x.rows();
    const auto n = static_cast<double>(batch);
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < batch; ++i) {
            sum += x(i, j);
        }
        const double mu = sum / n;
        double sq = 0.0;
        for (std::size_t i = 0; i < batch; ++i) {
            const double d = x(i, j) - mu;
            sq += d * d;
        }
        mean[j] = mu;
        var[j] = sq / n;
    }
}

void adamw_update(std::span<double> value, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, const AdamWHyper& h) {
    for (std::size_t p = 0; p < value.size(); ++p) {
        m[p] = h.beta1 * m[p] + (1.0 - h.beta1) * grad[p];
        v[p] = h.beta2 * v[p] + (1.0 - h.beta2) * grad[p] * grad[p];
        const double m_hat = m[p] / h.bias_correction1;
        const double v_hat = v[p] / h.bias_correction2;
        const double theta = value[p];
        value[p] = theta - h.lr * (m_hat / (std::sqrt(v_hat) + h.epsilon)) - h.lr * h.weight_decay * theta;
    }
}

} // namespace semlp::kernels::reference
