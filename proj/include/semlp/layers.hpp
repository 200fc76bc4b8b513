#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "semlp/matrix.hpp"
#include "semlp/rng.hpp"

namespace semlp {

enum class Mode { train, eval };

/// Affine layer parameters, weight stored out_dim x in_dim.
struct DenseParams {
    Matrix weight;
    std::vector<double> bias;
    Matrix grad_weight;
    std::vector<double> grad_bias;

    DenseParams() = default;
    DenseParams(std::size_t in_dim, std::size_t out_dim);

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }

    /// Weights and bias uniform in +-1/sqrt(fan_in).
    void init_uniform(Rng& rng);
    void zero_grad();
};

Matrix dense_forward(const Matrix& x, const DenseParams& p);

/// Accumulates weight/bias gradients for the forward input `x` and returns dL/dx.
Matrix dense_backward(const Matrix& x, const Matrix& grad_out, DenseParams& p);

// Exact error-function form: 0.5 v (1 + erf(v / sqrt 2)).
double gelu(double v) noexcept;
double gelu_derivative(double v) noexcept;
Matrix gelu(const Matrix& x);
/// grad_out * GELU'(pre) elementwise.
Matrix gelu_backward(const Matrix& pre, const Matrix& grad_out);

double sigmoid(double v) noexcept;

struct BatchMoments {
    std::vector<double> mean;
    std::vector<double> var;
};

struct BatchNormState {
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    std::vector<double> grad_gamma;
    std::vector<double> grad_beta;
    double momentum = 0.1;
    double epsilon = 1e-5;
    /// When set, train mode normalizes with these biased moments instead of the batch's
    /// and leaves the running statistics alone; the layer is then affine in its input.
    /// Gradient checks use this to hold batch statistics fixed.
    std::optional<BatchMoments> frozen;

    BatchNormState() = default;
    explicit BatchNormState(std::size_t features, double momentum = 0.1, double epsilon = 1e-5);

    std::size_t features() const noexcept { return gamma.size(); }
    void zero_grad();
};

struct BatchNormCache {
    Matrix x_hat;
    std::vector<double> inv_std;
    bool frozen = false;
};

/// Train mode normalizes with the batch moments, updates the running statistics and,
/// when `cache` is given, records what the backward pass needs. Eval mode reads the
/// running statistics only.
Matrix batchnorm_forward(const Matrix& x, BatchNormState& s, Mode mode, BatchNormCache* cache = nullptr);
Matrix batchnorm_infer(const Matrix& x, const BatchNormState& s);
Matrix batchnorm_backward(const BatchNormCache& cache, const Matrix& grad_out, BatchNormState& s);

struct DropoutResult {
    Matrix output;
    Matrix mask; // 1 keeps, 0 drops
};

/// Inverted dropout: survivors are scaled by 1 / (1 - rate) at train time.
DropoutResult dropout(const Matrix& x, double rate, Mode mode, Rng* rng);
Matrix dropout_backward(const Matrix& mask, double rate, const Matrix& grad_out);

} // namespace semlp
