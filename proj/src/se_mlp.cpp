#include "semlp/se_mlp.hpp"

#include <fmt/format.h>

#include "semlp/error.hpp"

namespace semlp {

SEBlockParams::SEBlockParams(std::size_t channels, std::size_t ratio)
    : reduce(channels, ratio == 0 ? 0 : channels / ratio), expand(ratio == 0 ? 0 : channels / ratio, channels),
      reduction_ratio(ratio) {
    if (ratio == 0 || channels % ratio != 0) {
        throw ConfigError(fmt::format("SE block: reduction ratio {} must divide {} channels", ratio, channels));
    }
}

Matrix se_squeeze(const Matrix& x) { return x; }

Matrix se_excitation(const Matrix& z, const SEBlockParams& se) {
    if (z.cols() != se.channels() || se.reduce.in_dim() != se.channels()) {
        throw DimensionError("se_excitation: descriptor " + z.shape_string() + " does not match gate with " +
                             std::to_string(se.channels()) + " channels");
    }
    Matrix s = dense_forward(gelu(dense_forward(z, se.reduce)), se.expand);
    for (double& v : s.data()) {
        v = sigmoid(v);
    }
    return s;
}

Matrix se_scale(const Matrix& x, const Matrix& gates) {
    require_same_shape(x, gates, "se_scale");
    Matrix y(x.rows(), x.cols());
    const auto xs = x.data();
    const auto gs = gates.data();
    auto ys = y.data();
    for (std::size_t i = 0; i < ys.size(); ++i) {
        ys[i] = gs[i] * xs[i];
    }
    return y;
}

Matrix residual_fuse(const Matrix& h, const Matrix& x, const DenseParams& proj) {
    if (x.rows() != h.rows() || proj.in_dim() != x.cols() || proj.out_dim() != h.cols()) {
        throw DimensionError("residual_fuse: features " + h.shape_string() + ", input " + x.shape_string() +
                             ", projection " + proj.weight.shape_string());
    }
    Matrix y = dense_forward(x, proj);
    const auto hs = h.data();
    auto ys = y.data();
    for (std::size_t i = 0; i < ys.size(); ++i) {
        ys[i] += hs[i];
    }
    return y;
}

Matrix se_block_forward(const Matrix& x, const SEBlockParams& se, SECache* cache) {
    if (cache == nullptr) {
        return se_scale(x, se_excitation(se_squeeze(x), se));
    }
    if (x.cols() != se.channels()) {
        throw DimensionError("se_block_forward: input " + x.shape_string() + " does not match gate with " +
                             std::to_string(se.channels()) + " channels");
    }
    cache->input = se_squeeze(x);
    cache->reduce_pre = dense_forward(cache->input, se.reduce);
    cache->hidden = gelu(cache->reduce_pre);
    cache->gate = dense_forward(cache->hidden, se.expand);
    for (double& v : cache->gate.data()) {
        v = sigmoid(v);
    }
    return se_scale(x, cache->gate);
}

Matrix se_block_backward(const SECache& cache, const Matrix& grad_out, SEBlockParams& se) {
    require_same_shape(cache.gate, grad_out, "se_block_backward");
    Matrix dx(grad_out.rows(), grad_out.cols());
    Matrix d_logit(grad_out.rows(), grad_out.cols());
    const auto g = grad_out.data();
    const auto s = cache.gate.data();
    const auto x = cache.input.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        dx.data()[i] = g[i] * s[i];
        d_logit.data()[i] = g[i] * x[i] * s[i] * (1.0 - s[i]);
    }
    const Matrix d_hidden = dense_backward(cache.hidden, d_logit, se.expand);
    const Matrix d_desc = dense_backward(cache.input, gelu_backward(cache.reduce_pre, d_hidden), se.reduce);
    for (std::size_t i = 0; i < g.size(); ++i) {
        dx.data()[i] += d_desc.data()[i];
    }
    return dx;
}

Matrix residual_fuse_backward(const Matrix& x, const Matrix& grad_out, DenseParams& proj) {
    return dense_backward(x, grad_out, proj);
}

std::string_view variant_name(Variant v) noexcept {
    switch (v) {
    case Variant::mlp: return "mlp";
    case Variant::mlp_se: return "mlp-se";
    case Variant::se_mlp: return "se-mlp";
    }
    return "?";
}

std::string_view variant_label(Variant v) noexcept {
    switch (v) {
    case Variant::mlp: return "Three-layer MLP";
    case Variant::mlp_se: return "Three-layer MLP + SE";
    case Variant::se_mlp: return "SE-MLP";
    }
    return "?";
}

Variant parse_variant(std::string_view name) {
    for (const Variant v : {Variant::mlp, Variant::mlp_se, Variant::se_mlp}) {
        if (name == variant_name(v)) {
            return v;
        }
    }
    throw ConfigError("unknown variant '" + std::string(name) + "' (expected mlp, mlp-se or se-mlp)");
}

SEMLPConfig SEMLPConfig::for_variant(Variant v) {
    SEMLPConfig c;
    c.use_se = v != Variant::mlp;
    c.use_residual = v == Variant::se_mlp;
    return c;
}

Variant SEMLPConfig::variant() const {
    if (!use_se && !use_residual) {
        return Variant::mlp;
    }
    if (use_se && !use_residual) {
        return Variant::mlp_se;
    }
    if (use_se && use_residual) {
        return Variant::se_mlp;
    }
    throw ConfigError("model config: a residual shortcut without SE gates is not one of the studied variants");
}

void SEMLPConfig::validate() const {
    if (input_dim == 0 || output_dim != kOutputTargets) {
        throw ConfigError(fmt::format("model config: input_dim must be positive and output_dim {}", kOutputTargets));
    }
    if (reduction_ratio == 0) {
        throw ConfigError("model config: reduction ratio must be positive");
    }
    for (const std::size_t h : hidden_dims) {
        if (h == 0 || h % reduction_ratio != 0) {
            throw ConfigError(
                fmt::format("model config: hidden width {} is not divisible by reduction ratio {}", h, reduction_ratio));
        }
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ConfigError("model config: dropout rate must be in [0, 1)");
    }
    (void)variant();
}

SEMLPModel SEMLPModel::build(const SEMLPConfig& config, Rng& rng) {
    config.validate();
    SEMLPModel m;
    m.config_ = config;
    std::size_t in = config.input_dim;
    for (std::size_t b = 0; b < 3; ++b) {
        const std::size_t width = config.hidden_dims[b];
        Block& block = m.blocks_[b];
        block.dense = DenseParams(in, width);
        block.dense.init_uniform(rng);
        block.norm = BatchNormState(width);
        block.dropout_rate = config.dropout_rate;
        if (config.use_se) {
            block.se.emplace(width, config.reduction_ratio);
            block.se->reduce.init_uniform(rng);
            block.se->expand.init_uniform(rng);
        }
        in = width;
    }
    if (config.use_residual) {
        m.residual_projection_.emplace(config.input_dim, config.hidden_dims[2]);
        m.residual_projection_->init_uniform(rng);
    }
    m.head_ = DenseParams(config.hidden_dims[2], config.output_dim);
    m.head_.init_uniform(rng);
    return m;
}

SEMLPModel build_variant(const SEMLPConfig& config, Rng& rng) { return SEMLPModel::build(config, rng); }

void SEMLPModel::check_input(const Matrix& x) const {
    if (x.cols() != config_.input_dim) {
        throw DimensionError(fmt::format("model: input has {} features ({}), model expects {}", x.cols(),
                                         x.shape_string(), config_.input_dim));
    }
}

Matrix SEMLPModel::predict(const Matrix& x, std::vector<std::string>* warnings) const {
    check_input(x);
    if (warnings != nullptr) {
        for (std::size_t r = 0; r < x.rows(); ++r) {
            if (is_extrapolated(x.row(r))) {
                warnings->push_back(fmt::format("row {}: input outside the training range, prediction is an extrapolation", r));
            }
        }
    }
    Matrix h = x;
    for (const Block& block : blocks_) {
        h = gelu(batchnorm_infer(dense_forward(h, block.dense), block.norm));
        if (block.se) {
            h = se_block_forward(h, *block.se);
        }
    }
    if (residual_projection_) {
        h = residual_fuse(h, x, *residual_projection_);
    }
    return dense_forward(h, head_);
}

Matrix SEMLPModel::forward(const Matrix& x, Mode mode, Rng* rng, ForwardCache* cache) {
    if (mode == Mode::eval) {
        return predict(x);
    }
    check_input(x);
    ForwardCache local;
    ForwardCache& c = cache != nullptr ? *cache : local;
    c.input = x;
    Matrix h = x;
    for (std::size_t b = 0; b < 3; ++b) {
        Block& block = blocks_[b];
        BlockCache& bc = c.blocks[b];
        bc.input = h;
        bc.pre_activation = batchnorm_forward(dense_forward(h, block.dense), block.norm, Mode::train, &bc.norm);
        DropoutResult dropped = dropout(gelu(bc.pre_activation), block.dropout_rate, Mode::train, rng);
        bc.dropout_mask = std::move(dropped.mask);
        h = std::move(dropped.output);
        if (block.se) {
            h = se_block_forward(h, *block.se, &bc.se);
        }
    }
    if (residual_projection_) {
        h = residual_fuse(h, x, *residual_projection_);
    }
    c.head_input = h;
    c.populated = true;
    return dense_forward(h, head_);
}

Matrix SEMLPModel::backward(const ForwardCache& cache, const Matrix& grad_out) {
    if (!cache.populated) {
        throw StateError("model backward: no cache from a train-mode forward pass");
    }
    if (grad_out.rows() != cache.head_input.rows() || grad_out.cols() != head_.out_dim()) {
        throw DimensionError("model backward: gradient " + grad_out.shape_string() + " does not match output " +
                             std::to_string(cache.head_input.rows()) + "x" + std::to_string(head_.out_dim()));
    }
    Matrix dh = dense_backward(cache.head_input, grad_out, head_);
    Matrix dx_shortcut;
    if (residual_projection_) {
        dx_shortcut = residual_fuse_backward(cache.input, dh, *residual_projection_);
    }
    for (std::size_t b = 3; b-- > 0;) {
        Block& block = blocks_[b];
        const BlockCache& bc = cache.blocks[b];
        if (block.se) {
            dh = se_block_backward(bc.se, dh, *block.se);
        }
        dh = dropout_backward(bc.dropout_mask, block.dropout_rate, dh);
        dh = gelu_backward(bc.pre_activation, dh);
        dh = batchnorm_backward(bc.norm, dh, block.norm);
        dh = dense_backward(bc.input, dh, block.dense);
    }
    if (residual_projection_) {
        for (std::size_t i = 0; i < dh.size(); ++i) {
            dh.data()[i] += dx_shortcut.data()[i];
        }
    }
    return dh;
}

std::vector<ParamView> SEMLPModel::parameters() {
    std::vector<ParamView> out;
    const auto add_dense = [&out](const std::string& prefix, DenseParams& p) {
        out.push_back({prefix + ".weight", p.weight.data(), p.grad_weight.data()});
        out.push_back({prefix + ".bias", p.bias, p.grad_bias});
    };
    for (std::size_t b = 0; b < 3; ++b) {
        Block& block = blocks_[b];
        const std::string prefix = "block" + std::to_string(b + 1);
        add_dense(prefix + ".dense", block.dense);
        out.push_back({prefix + ".norm.gamma", block.norm.gamma, block.norm.grad_gamma});
        out.push_back({prefix + ".norm.beta", block.norm.beta, block.norm.grad_beta});
        if (block.se) {
            add_dense(prefix + ".se.reduce", block.se->reduce);
            add_dense(prefix + ".se.expand", block.se->expand);
        }
    }
    if (residual_projection_) {
        add_dense("residual", *residual_projection_);
    }
    add_dense("head", head_);
    return out;
}

std::size_t SEMLPModel::parameter_count() {
    std::size_t n = 0;
    for (const ParamView& p : parameters()) {
        n += p.value.size();
    }
    return n;
}

void SEMLPModel::zero_grad() {
    for (const ParamView& p : parameters()) {
        std::fill(p.grad.begin(), p.grad.end(), 0.0);
    }
}

} // namespace semlp
