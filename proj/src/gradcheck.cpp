#include "semlp/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "semlp/error.hpp"
#include "semlp/kernels.hpp"
#include "semlp/layers.hpp"
#include "semlp/rng.hpp"
#include "semlp/se_mlp.hpp"
#include "semlp/training.hpp"

namespace semlp {

std::vector<double> finite_difference_grad(const std::function<double()>& loss, std::span<double> params,
                                           double step) {
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double up = loss();
        params[i] = saved - step;
        const double down = loss();
        params[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric, double floor) {
    if (analytic.size() != numeric.size()) {
        throw DimensionError(fmt::format("relative_error: {} analytic vs {} numeric entries", analytic.size(),
                                         numeric.size()));
    }
    double diff = 0.0;
    double norm_a = 0.0;
    double norm_n = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        norm_a += analytic[i] * analytic[i];
        norm_n += numeric[i] * numeric[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(norm_a), std::sqrt(norm_n), floor});
}

namespace {

struct Tensor {
    std::string name;
    std::span<double> value;
    std::vector<double> analytic;
};

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) {
        v = rng.uniform(lo, hi);
    }
    return m;
}

std::vector<double> to_vector(const Matrix& m) { return {m.data().begin(), m.data().end()}; }

double weighted_sum(const Matrix& y, const Matrix& weights) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        acc += y.data()[i] * weights.data()[i];
    }
    return acc;
}

void compare(LayerCheck& check, std::vector<Tensor>& tensors, const std::function<double()>& loss,
             const GradcheckOptions& opt, std::size_t seed) {
    for (Tensor& t : tensors) {
        const auto numeric = finite_difference_grad(loss, t.value, opt.step);
        double err = relative_error(t.analytic, numeric);
        if (!std::isfinite(err)) {
            err = INFINITY;
        }
        if (err > check.worst_relative_error || check.worst_parameter.empty()) {
            std::size_t worst = 0;
            for (std::size_t i = 0; i < numeric.size(); ++i) {
                if (std::abs(t.analytic[i] - numeric[i]) > std::abs(t.analytic[worst] - numeric[worst])) {
                    worst = i;
                }
            }
            check.worst_relative_error = err;
            check.worst_parameter = fmt::format("{} seed {}, max |a-n| at [{}]", t.name, seed, worst);
        }
    }
}

void check_dense(LayerCheck& c, const GradcheckOptions& opt, std::size_t seed) {
    Rng rng(derive_seed(seed, "gradcheck.dense"));
    DenseParams p(5, 4);
    p.init_uniform(rng);
    for (double& b : p.bias) {
        b = rng.uniform(-0.5, 0.5);
    }
    Matrix x = random_matrix(opt.batch, 5, rng);
    const Matrix r = random_matrix(opt.batch, 4, rng);
    const Matrix dx = dense_backward(x, r, p);
    std::vector<Tensor> t{{"weight", p.weight.data(), to_vector(p.grad_weight)},
                          {"bias", p.bias, p.grad_bias},
                          {"input", x.data(), to_vector(dx)}};
    compare(c, t, [&] { return weighted_sum(dense_forward(x, p), r); }, opt, seed);
}

void check_gelu(LayerCheck& c, const GradcheckOptions& opt, std::size_t seed) {
    Rng rng(derive_seed(seed, "gradcheck.gelu"));
    Matrix x = random_matrix(opt.batch, 6, rng, -4.0, 4.0);
    const Matrix r = random_matrix(opt.batch, 6, rng);
    const Matrix dx = opt.gelu_backward ? opt.gelu_backward(x, r) : gelu_backward(x, r);
    std::vector<Tensor> t{{"input", x.data(), to_vector(dx)}};
    compare(c, t, [&] { return weighted_sum(gelu(x), r); }, opt, seed);
}

void check_batchnorm(LayerCheck& c, const GradcheckOptions& opt, std::size_t seed) {
    Rng rng(derive_seed(seed, "gradcheck.batchnorm"));
    BatchNormState s(6);
    for (std::size_t j = 0; j < 6; ++j) {
        s.gamma[j] = rng.uniform(0.5, 1.5);
        s.beta[j] = rng.uniform(-0.5, 0.5);
    }
    Matrix x = random_matrix(opt.batch, 6, rng, -2.0, 2.0);
    const Matrix r = random_matrix(opt.batch, 6, rng);
    BatchNormCache cache;
    BatchNormState work = s;
    batchnorm_forward(x, work, Mode::train, &cache);
    const Matrix dx = batchnorm_backward(cache, r, work);
    std::vector<Tensor> t{{"gamma", s.gamma, work.grad_gamma}, {"beta", s.beta, work.grad_beta},
                          {"input", x.data(), to_vector(dx)}};
    compare(c, t,
            [&] {
                BatchNormState probe = s;
                return weighted_sum(batchnorm_forward(x, probe, Mode::train), r);
            },
            opt, seed);
}

void check_dropout(LayerCheck& c, const GradcheckOptions& opt, std::size_t seed) {
    Rng rng(derive_seed(seed, "gradcheck.dropout"));
    Matrix x = random_matrix(opt.batch, 6, rng);
    const Matrix r = random_matrix(opt.batch, 6, rng);
    const std::uint64_t mask_seed = derive_seed(seed, "gradcheck.dropout.mask");
    const double rate = 0.1;
    Rng mask_rng(mask_seed);
    const DropoutResult d = dropout(x, rate, Mode::train, &mask_rng);
    std::vector<Tensor> t{{"input", x.data(), to_vector(dropout_backward(d.mask, rate, r))}};
    compare(c, t,
            [&] {
                Rng replay(mask_seed);
                return weighted_sum(dropout(x, rate, Mode::train, &replay).output, r);
            },
            opt, seed);
}

void check_se_block(LayerCheck& c, const GradcheckOptions& opt, std::size_t seed) {
    Rng rng(derive_seed(seed, "gradcheck.se"));
    SEBlockParams se(8, 2);
    se.reduce.init_uniform(rng);
    se.expand.init_uniform(rng);
    for (double& b : se.reduce.bias) {
        b = rng.uniform(-0.5, 0.5);
    }
    for (double& b : se.expand.bias) {
        b = rng.uniform(-0.5, 0.5);
    }
    Matrix x = random_matrix(opt.batch, 8, rng, -2.0, 2.0);
    const Matrix r = random_matrix(opt.batch, 8, rng);
    SECache cache;
    se_block_forward(x, se, &cache);
    const Matrix dx = se_block_backward(cache, r, se);
    std::vector<Tensor> t{{"reduce.weight", se.reduce.weight.data(), to_vector(se.reduce.grad_weight)},
                          {"reduce.bias", se.reduce.bias, se.reduce.grad_bias},
                          {"expand.weight", se.expand.weight.data(), to_vector(se.expand.grad_weight)},
                          {"expand.bias", se.expand.bias, se.expand.grad_bias},
                          {"input", x.data(), to_vector(dx)}};
    compare(c, t, [&] { return weighted_sum(se_block_forward(x, se), r); }, opt, seed);
}

void check_residual(LayerCheck& c, const GradcheckOptions& opt, std::size_t seed) {
    Rng rng(derive_seed(seed, "gradcheck.residual"));
    DenseParams proj(5, 6);
    proj.init_uniform(rng);
    Matrix h = random_matrix(opt.batch, 6, rng);
    Matrix x = random_matrix(opt.batch, 5, rng);
    const Matrix r = random_matrix(opt.batch, 6, rng);
    const Matrix dx = residual_fuse_backward(x, r, proj);
    std::vector<Tensor> t{{"proj.weight", proj.weight.data(), to_vector(proj.grad_weight)},
                          {"proj.bias", proj.bias, proj.grad_bias},
                          {"features", h.data(), to_vector(r)},
                          {"input", x.data(), to_vector(dx)}};
    compare(c, t, [&] { return weighted_sum(residual_fuse(h, x, proj), r); }, opt, seed);
}

void check_model(LayerCheck& c, Variant variant, const GradcheckOptions& opt, std::size_t seed) {
    Rng rng(derive_seed(seed, "gradcheck.model"));
    SEMLPConfig cfg = SEMLPConfig::for_variant(variant);
    cfg.hidden_dims = {opt.hidden, opt.hidden, opt.hidden};
    SEMLPModel model = build_variant(cfg, rng);
    // Non-trivial affine batchnorm parameters so their gradients are exercised.
    for (Block& b : model.blocks()) {
        for (std::size_t j = 0; j < b.norm.features(); ++j) {
            b.norm.gamma[j] = rng.uniform(0.5, 1.5);
            b.norm.beta[j] = rng.uniform(-0.5, 0.5);
        }
    }
    Matrix x = random_matrix(opt.batch, kInputFeatures, rng, 0.0, 1.0);
    const Matrix y = random_matrix(opt.batch, kOutputTargets, rng, 0.0, 1.0);
    const std::uint64_t mask_seed = derive_seed(seed, "gradcheck.model.dropout");
    const LossWeights weights;

    // Freeze each block's batch moments at their values for this batch.
    if (opt.freeze_batch_stats) {
        ForwardCache probe;
        Rng masks(mask_seed);
        SEMLPModel scratch = model;
        scratch.forward(x, Mode::train, &masks, &probe);
        for (std::size_t b = 0; b < model.blocks().size(); ++b) {
            const Matrix z = dense_forward(probe.blocks[b].input, model.blocks()[b].dense);
            BatchMoments m{std::vector<double>(z.cols()), std::vector<double>(z.cols())};
            kernels::column_moments(z, m.mean, m.var);
            model.blocks()[b].norm.frozen = std::move(m);
        }
    }

    ForwardCache cache;
    Rng masks(mask_seed);
    model.zero_grad();
    const Matrix pred = model.forward(x, Mode::train, &masks, &cache);
    const Matrix dx = model.backward(cache, wmse_loss(pred, y, weights).grad);

    std::vector<Tensor> tensors;
    for (const ParamView& p : model.parameters()) {
        tensors.push_back({p.name, p.value, {p.grad.begin(), p.grad.end()}});
    }
    tensors.push_back({"input", x.data(), to_vector(dx)});
    compare(c, tensors,
            [&] {
                Rng replay(mask_seed);
                return wmse_loss(model.forward(x, Mode::train, &replay), y, weights).value;
            },
            opt, seed);
}

} // namespace

GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
    GradcheckReport report;
    report.seeds = opt.seeds;
    const auto run = [&](const std::string& name, const auto& check) {
        LayerCheck c;
        c.layer = name;
        for (std::size_t s = 0; s < opt.seeds; ++s) {
            check(c, opt, s);
        }
        c.passed = c.worst_relative_error < opt.tolerance;
        report.worst_relative_error = std::max(report.worst_relative_error, c.worst_relative_error);
        report.passed = report.passed && c.passed;
        report.layers.push_back(std::move(c));
    };
    run("dense", check_dense);
    run("gelu", check_gelu);
    run("batchnorm", check_batchnorm);
    run("dropout", check_dropout);
    run("se_block", check_se_block);
    run("residual", check_residual);
    for (const Variant v : {Variant::mlp, Variant::mlp_se, Variant::se_mlp}) {
        run(std::string("model:") + std::string(variant_name(v)),
            [v](LayerCheck& c, const GradcheckOptions& o, std::size_t s) { check_model(c, v, o, s); });
    }
    return report;
}

} // namespace semlp
