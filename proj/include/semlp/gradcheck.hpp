#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "semlp/matrix.hpp"

namespace semlp {

/// Central differences (L(theta+h) - L(theta-h)) / 2h for every entry of `params`,
/// restoring each entry afterwards. `loss` must be deterministic (replay any dropout
/// masks from a fixed seed).
std::vector<double> finite_difference_grad(const std::function<double()>& loss, std::span<double> params,
                                           double step);

/// ||a - n|| / max(||a||, ||n||, floor) in the Euclidean norm over one parameter tensor.
/// Per-entry ratios are meaningless for entries whose true gradient is near zero, so
/// the tolerance applies per tensor; the floor covers tensors whose gradient is exactly
/// zero (a dense bias feeding batchnorm), where the numeric side is pure roundoff.
double relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-6);

struct LayerCheck {
    std::string layer;
    double worst_relative_error = 0.0;
    /// "<tensor> seed <s>, max |a-n| at [<index>]"
    std::string worst_parameter;
    bool passed = true;
};

struct GradcheckReport {
    std::vector<LayerCheck> layers;
    double worst_relative_error = 0.0;
    std::size_t seeds = 0;
    bool passed = true;
};

struct GradcheckOptions {
    std::size_t seeds = 20;
    double step = 1e-4;
    double tolerance = 1e-4;
    std::size_t batch = 8;
    std::size_t hidden = 16;
    /// Assembled-model checks hold each block's batch moments fixed at the values of
    /// the probe batch; false keeps live batch statistics.
    bool freeze_batch_stats = true;
    /// Backward rule used for the GELU layer check; swapped out by mutation tests.
    std::function<Matrix(const Matrix& pre, const Matrix& grad_out)> gelu_backward;
};

/// Checks dense, GELU, batchnorm, dropout, SE block, residual fusion and the three
/// assembled variants against finite differences over `seeds` random draws.
GradcheckReport run_gradcheck(const GradcheckOptions& options);

} // namespace semlp
