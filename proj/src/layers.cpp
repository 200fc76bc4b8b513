#include "semlp/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "semlp/error.hpp"
#include "semlp/kernels.hpp"

namespace semlp {

DenseParams::DenseParams(std::size_t in_dim, std::size_t out_dim)
    : weight(out_dim, in_dim), bias(out_dim, 0.0), grad_weight(out_dim, in_dim), grad_bias(out_dim, 0.0) {}

void DenseParams::init_uniform(Rng& rng) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(in_dim()));
    for (double& w : weight.data()) {
        w = rng.uniform(-limit, limit);
    }
    for (double& b : bias) {
        b = rng.uniform(-limit, limit);
    }
}

void DenseParams::zero_grad() {
    grad_weight.fill(0.0);
    std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

Matrix dense_forward(const Matrix& x, const DenseParams& p) {
    if (x.cols() != p.in_dim()) {
        throw DimensionError("dense_forward: input " + x.shape_string() + " does not match weight " +
                             p.weight.shape_string());
    }
    Matrix y(x.rows(), p.out_dim());
    kernels::affine(x, p.weight, p.bias, y);
    return y;
}

Matrix dense_backward(const Matrix& x, const Matrix& grad_out, DenseParams& p) {
    if (x.cols() != p.in_dim() || grad_out.cols() != p.out_dim() || grad_out.rows() != x.rows()) {
        throw DimensionError("dense_backward: input " + x.shape_string() + ", grad " +
                             grad_out.shape_string() + ", weight " + p.weight.shape_string());
    }
    kernels::accumulate_affine_grads(x, grad_out, p.grad_weight, p.grad_bias);
    Matrix dx(x.rows(), x.cols());
    kernels::affine_input_grad(grad_out, p.weight, dx);
    return dx;
}

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;

double gelu(double v) noexcept { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); }

double gelu_derivative(double v) noexcept {
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    const double pdf = std::exp(-0.5 * v * v) * (std::numbers::inv_sqrtpi * kInvSqrt2);
    return cdf + v * pdf;
}

Matrix gelu(const Matrix& x) {
    Matrix y(x.rows(), x.cols());
    std::transform(x.data().begin(), x.data().end(), y.data().begin(), [](double v) { return gelu(v); });
    return y;
}

Matrix gelu_backward(const Matrix& pre, const Matrix& grad_out) {
    require_same_shape(pre, grad_out, "gelu_backward");
    Matrix dx(pre.rows(), pre.cols());
    const auto p = pre.data();
    const auto g = grad_out.data();
    auto d = dx.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = g[i] * gelu_derivative(p[i]);
    }
    return dx;
}

double sigmoid(double v) noexcept {
    if (v >= 0.0) {
        return 1.0 / (1.0 + std::exp(-v));
    }
    const double e = std::exp(v);
    return e / (1.0 + e);
}

BatchNormState::BatchNormState(std::size_t features, double momentum_, double epsilon_)
    : gamma(features, 1.0),
      beta(features, 0.0),
      running_mean(features, 0.0),
      running_var(features, 1.0),
      grad_gamma(features, 0.0),
      grad_beta(features, 0.0),
      momentum(momentum_),
      epsilon(epsilon_) {
    if (!(momentum > 0.0 && momentum < 1.0) || !(epsilon > 0.0)) {
        throw ConfigError("BatchNormState: momentum must be in (0,1) and epsilon > 0");
    }
}

void BatchNormState::zero_grad() {
    std::fill(grad_gamma.begin(), grad_gamma.end(), 0.0);
    std::fill(grad_beta.begin(), grad_beta.end(), 0.0);
}

namespace {
void require_features(const Matrix& x, const BatchNormState& s, const char* context) {
    if (x.cols() != s.features()) {
        throw DimensionError(std::string(context) + ": input " + x.shape_string() + " has " +
                             std::to_string(x.cols()) + " features, state has " +
                             std::to_string(s.features()));
    }
}
} // namespace

Matrix batchnorm_infer(const Matrix& x, const BatchNormState& s) {
    require_features(x, s, "batchnorm_infer");
    Matrix y(x.rows(), x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        const double inv_std = 1.0 / std::sqrt(s.running_var[j] + s.epsilon);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            y(i, j) = s.gamma[j] * (x(i, j) - s.running_mean[j]) * inv_std + s.beta[j];
        }
    }
    return y;
}

namespace {

Matrix batchnorm_frozen(const Matrix& x, const BatchNormState& s, BatchNormCache* cache) {
    const BatchMoments& m = *s.frozen;
    if (m.mean.size() != x.cols() || m.var.size() != x.cols()) {
        throw DimensionError("batchnorm_forward: frozen moments do not match " + x.shape_string());
    }
    Matrix x_hat(x.rows(), x.cols());
    Matrix y(x.rows(), x.cols());
    std::vector<double> inv_std(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        inv_std[j] = 1.0 / std::sqrt(m.var[j] + s.epsilon);
        for (std::size_t i = 0; i < x.rows(); ++i) {
            x_hat(i, j) = (x(i, j) - m.mean[j]) * inv_std[j];
            y(i, j) = s.gamma[j] * x_hat(i, j) + s.beta[j];
        }
    }
    if (cache != nullptr) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = std::move(inv_std);
        cache->frozen = true;
    }
    return y;
}

} // namespace

Matrix batchnorm_forward(const Matrix& x, BatchNormState& s, Mode mode, BatchNormCache* cache) {
    if (mode == Mode::eval) {
        return batchnorm_infer(x, s);
    }
    require_features(x, s, "batchnorm_forward");
    const std::size_t batch = x.rows();
    if (s.frozen) {
        return batchnorm_frozen(x, s, cache);
    }
    if (batch < 2) {
        throw BatchTooSmallError("batchnorm_forward: train mode needs a batch of at least 2, got " +
                                 std::to_string(batch));
    }
    const std::size_t cols = x.cols();
    std::vector<double> mean(cols);
    std::vector<double> var(cols);
    kernels::column_moments(x, mean, var);

    Matrix x_hat(batch, cols);
    Matrix y(batch, cols);
    std::vector<double> inv_std(cols);
    const double unbias = static_cast<double>(batch) / static_cast<double>(batch - 1);
    for (std::size_t j = 0; j < cols; ++j) {
        inv_std[j] = 1.0 / std::sqrt(var[j] + s.epsilon);
        for (std::size_t i = 0; i < batch; ++i) {
            x_hat(i, j) = (x(i, j) - mean[j]) * inv_std[j];
            y(i, j) = s.gamma[j] * x_hat(i, j) + s.beta[j];
        }
        s.running_mean[j] = (1.0 - s.momentum) * s.running_mean[j] + s.momentum * mean[j];
        s.running_var[j] = (1.0 - s.momentum) * s.running_var[j] + s.momentum * var[j] * unbias;
    }
    if (cache != nullptr) {
        cache->x_hat = std::move(x_hat);
        cache->inv_std = std::move(inv_std);
        cache->frozen = false;
    }
    return y;
}

Matrix batchnorm_backward(const BatchNormCache& cache, const Matrix& grad_out, BatchNormState& s) {
    require_same_shape(cache.x_hat, grad_out, "batchnorm_backward");
    const std::size_t batch = grad_out.rows();
    const std::size_t cols = grad_out.cols();
    const auto n = static_cast<double>(batch);
    Matrix dx(batch, cols);
    for (std::size_t j = 0; j < cols; ++j) {
        double sum_g = 0.0;
        double sum_gx = 0.0;
        for (std::size_t i = 0; i < batch; ++i) {
            sum_g += grad_out(i, j);
            sum_gx += grad_out(i, j) * cache.x_hat(i, j);
        }
        s.grad_beta[j] += sum_g;
        s.grad_gamma[j] += sum_gx;
        if (cache.frozen) {
            for (std::size_t i = 0; i < batch; ++i) {
                dx(i, j) = s.gamma[j] * cache.inv_std[j] * grad_out(i, j);
            }
            continue;
        }
        const double scale = s.gamma[j] * cache.inv_std[j] / n;
        for (std::size_t i = 0; i < batch; ++i) {
            dx(i, j) = scale * (n * grad_out(i, j) - sum_g - cache.x_hat(i, j) * sum_gx);
        }
    }
    return dx;
}

DropoutResult dropout(const Matrix& x, double rate, Mode mode, Rng* rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
    }
    DropoutResult r{x, Matrix(x.rows(), x.cols(), 1.0)};
    if (mode == Mode::eval || rate == 0.0) {
        return r;
    }
    if (rng == nullptr) {
        throw StateError("dropout: train mode needs a random generator");
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    auto out = r.output.data();
    auto mask = r.mask.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (rng->uniform() < rate) {
            mask[i] = 0.0;
            out[i] = 0.0;
        } else {
            out[i] *= keep_scale;
        }
    }
    return r;
}

Matrix dropout_backward(const Matrix& mask, double rate, const Matrix& grad_out) {
    require_same_shape(mask, grad_out, "dropout_backward");
    const double keep_scale = 1.0 / (1.0 - rate);
    Matrix dx(grad_out.rows(), grad_out.cols());
    const auto m = mask.data();
    const auto g = grad_out.data();
    auto d = dx.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = m[i] * g[i] * keep_scale;
    }
    return dx;
}

} // namespace semlp
