#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "semlp/data.hpp"
#include "semlp/layers.hpp"
#include "semlp/matrix.hpp"
#include "semlp/rng.hpp"

namespace semlp {

/// Channel gate: C -> C/r -> C.
struct SEBlockParams {
    DenseParams reduce;
    DenseParams expand;
    std::size_t reduction_ratio = 1;

    SEBlockParams() = default;
    SEBlockParams(std::size_t channels, std::size_t reduction_ratio);

    std::size_t channels() const noexcept { return expand.out_dim(); }
};

/// Global average pooling over a 1x1 spatial extent: the descriptor is the input itself.
Matrix se_squeeze(const Matrix& x);
/// sigmoid(W2 gelu(W1 z + b1) + b2), every gate in (0, 1).
Matrix se_excitation(const Matrix& z, const SEBlockParams& se);
Matrix se_scale(const Matrix& x, const Matrix& gates);
/// h + proj(x).
Matrix residual_fuse(const Matrix& h, const Matrix& x, const DenseParams& proj);

struct SECache {
    Matrix input;
    Matrix reduce_pre; // W1 z + b1
    Matrix hidden;     // gelu(reduce_pre)
    Matrix gate;
};

/// squeeze -> excitation -> scale, recording what se_block_backward needs.
Matrix se_block_forward(const Matrix& x, const SEBlockParams& se, SECache* cache = nullptr);
/// Accumulates gate parameter gradients; returns dL/dx through both the gate and the scaled path.
Matrix se_block_backward(const SECache& cache, const Matrix& grad_out, SEBlockParams& se);

/// Accumulates projection gradients; returns dL/dx of the shortcut input (dL/dh is grad_out).
Matrix residual_fuse_backward(const Matrix& x, const Matrix& grad_out, DenseParams& proj);

enum class Variant { mlp, mlp_se, se_mlp };

std::string_view variant_name(Variant v) noexcept;  // "mlp", "mlp-se", "se-mlp"
std::string_view variant_label(Variant v) noexcept; // display name used in reports
Variant parse_variant(std::string_view name);

struct SEMLPConfig {
    std::size_t input_dim = kInputFeatures;
    std::array<std::size_t, 3> hidden_dims{64, 64, 64};
    std::size_t reduction_ratio = 2;
    double dropout_rate = 0.1;
    bool use_se = true;
    bool use_residual = true;
    std::size_t output_dim = kOutputTargets;

    static SEMLPConfig for_variant(Variant v);
    Variant variant() const;
    void validate() const;
    friend bool operator==(const SEMLPConfig&, const SEMLPConfig&) = default;
};

struct Block {
    DenseParams dense;
    BatchNormState norm;
    double dropout_rate = 0.0;
    std::optional<SEBlockParams> se;
};

struct BlockCache {
    Matrix input;
    Matrix pre_activation; // batchnorm output, GELU input
    BatchNormCache norm;
    Matrix dropout_mask;
    SECache se;
};

/// Everything the backward pass needs; filled only by a train-mode forward pass.
struct ForwardCache {
    std::array<BlockCache, 3> blocks;
    Matrix input;
    Matrix head_input;
    bool populated = false;
};

/// Named view of one parameter tensor and its gradient, in a stable order.
struct ParamView {
    std::string name;
    std::span<double> value;
    std::span<double> grad;
};

class SEMLPModel {
public:
    SEMLPModel() = default;

    /// Freshly initialized model of the configured variant; same seed, same weights.
    static SEMLPModel build(const SEMLPConfig& config, Rng& rng);

    const SEMLPConfig& config() const noexcept { return config_; }
    std::array<Block, 3>& blocks() noexcept { return blocks_; }
    const std::array<Block, 3>& blocks() const noexcept { return blocks_; }
    std::optional<DenseParams>& residual_projection() noexcept { return residual_projection_; }
    const std::optional<DenseParams>& residual_projection() const noexcept { return residual_projection_; }
    DenseParams& head() noexcept { return head_; }
    const DenseParams& head() const noexcept { return head_; }

    const std::optional<NormParams>& norm_params() const noexcept { return norm_params_; }
    void set_norm_params(const NormParams& np) { norm_params_ = np; }

    /// Train mode needs `rng` (dropout) and fills `cache` when given; it also updates
    /// batchnorm running statistics. Eval mode is deterministic and leaves state alone.
    Matrix forward(const Matrix& x, Mode mode, Rng* rng = nullptr, ForwardCache* cache = nullptr);

    /// Eval-mode forward. Appends a message to `warnings` when any normalized input lies
    /// outside [0, 1].
    Matrix predict(const Matrix& x, std::vector<std::string>* warnings = nullptr) const;

    /// Accumulates parameter gradients for dL/d(output) = grad_out; returns dL/dx.
    Matrix backward(const ForwardCache& cache, const Matrix& grad_out);

    std::vector<ParamView> parameters();
    std::size_t parameter_count();
    void zero_grad();

private:
    void check_input(const Matrix& x) const;

    SEMLPConfig config_;
    std::array<Block, 3> blocks_;
    std::optional<DenseParams> residual_projection_;
    DenseParams head_;
    std::optional<NormParams> norm_params_;
};

SEMLPModel build_variant(const SEMLPConfig& config, Rng& rng);

} // namespace semlp
