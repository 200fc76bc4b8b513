#pragma once

// A plain three-layer perceptron written without any of the library's layer code:
// its own loops, GELU through erfc, batchnorm in inference form. Weights are copied
// field by field from a model so the two can be compared as functions.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "semlp/se_mlp.hpp"

namespace semlp::test {

struct PlainLayer {
    std::vector<std::vector<double>> w; // out x in
    std::vector<double> b;
    std::vector<double> gamma, beta, mean, var;
    double eps = 0.0;
};

struct PlainMlp {
    std::vector<PlainLayer> hidden;
    std::vector<std::vector<double>> head_w;
    std::vector<double> head_b;

    static std::vector<std::vector<double>> copy_weight(const Matrix& m) {
        std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
        for (std::size_t r = 0; r < m.rows(); ++r) {
            for (std::size_t c = 0; c < m.cols(); ++c) {
                out[r][c] = m(r, c);
            }
        }
        return out;
    }

    static PlainMlp copy_from(const SEMLPModel& model) {
        PlainMlp p;
        for (const Block& b : model.blocks()) {
            p.hidden.push_back({copy_weight(b.dense.weight), b.dense.bias, b.norm.gamma, b.norm.beta,
                                b.norm.running_mean, b.norm.running_var, b.norm.epsilon});
        }
        p.head_w = copy_weight(model.head().weight);
        p.head_b = model.head().bias;
        return p;
    }

    std::vector<double> operator()(std::vector<double> h) const {
        for (const PlainLayer& l : hidden) {
            std::vector<double> next(l.b.size());
            for (std::size_t j = 0; j < next.size(); ++j) {
                double z = l.b[j];
                for (std::size_t k = 0; k < h.size(); ++k) {
                    z += l.w[j][k] * h[k];
                }
                const double n = l.gamma[j] * (z - l.mean[j]) / std::sqrt(l.var[j] + l.eps) + l.beta[j];
                next[j] = 0.5 * n * std::erfc(-n / std::numbers::sqrt2);
            }
            h = std::move(next);
        }
        std::vector<double> out(head_b.size());
        for (std::size_t j = 0; j < out.size(); ++j) {
            double z = head_b[j];
            for (std::size_t k = 0; k < h.size(); ++k) {
                z += head_w[j][k] * h[k];
            }
            out[j] = z;
        }
        return out;
    }
};

/// Max absolute difference between model.predict and the plain oracle over `batches`
/// random batches. An untrained model gets random batchnorm running statistics first so
/// the inference normalization is not the identity.
inline double plain_mlp_max_diff(SEMLPModel& model, std::size_t batches, std::uint64_t seed,
                                 bool randomize_norm = true) {
    Rng rng(seed);
    for (Block& b : model.blocks()) {
        if (!randomize_norm) {
            break;
        }
        for (std::size_t j = 0; j < b.norm.features(); ++j) {
            b.norm.gamma[j] = rng.uniform(0.5, 1.5);
            b.norm.beta[j] = rng.uniform(-0.5, 0.5);
            b.norm.running_mean[j] = rng.uniform(-0.3, 0.3);
            b.norm.running_var[j] = rng.uniform(0.2, 2.0);
        }
    }
    const PlainMlp oracle = PlainMlp::copy_from(model);
    double worst = 0.0;
    for (std::size_t batch = 0; batch < batches; ++batch) {
        const std::size_t rows = 1 + rng.below(32);
        Matrix x(rows, model.config().input_dim);
        for (double& v : x.data()) {
            v = rng.uniform(-0.2, 1.2);
        }
        const Matrix y = model.predict(x);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto row = x.row(r);
            const std::vector<double> expect = oracle(std::vector<double>(row.begin(), row.end()));
            for (std::size_t c = 0; c < expect.size(); ++c) {
                worst = std::max(worst, std::abs(expect[c] - y(r, c)));
            }
        }
    }
    return worst;
}

} // namespace semlp::test
