#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "semlp/data.hpp"
#include "semlp/matrix.hpp"
#include "semlp/metrics.hpp"
#include "semlp/se_mlp.hpp"

namespace semlp {

struct LossWeights {
    double peak = 0.7;
    double width = 0.3;
};

struct TrainConfig {
    std::size_t batch_size = 32;
    std::size_t max_epochs = 200;
    double lr0 = 1e-3;
    double weight_decay = 1e-4;
    double plateau_factor = 0.5;
    std::size_t plateau_patience = 15;
    double lr_floor = 1e-6;
    LossWeights loss_weights;
    std::size_t k_folds = 4;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;
};

struct LossResult {
    double value = 0.0;
    Matrix grad; // dL/dpred
};

/// w_peak * MSE(column 0) + w_width * MSE(column 1), with its exact gradient.
LossResult wmse_loss(const Matrix& pred, const Matrix& target, const LossWeights& w);

struct AdamWState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::uint64_t t = 0;
};

/// One AdamW step over every parameter tensor at learning rate `lr`:
/// theta -= lr * m_hat / (sqrt(v_hat) + eps) + lr * wd * theta.
void adamw_step(std::span<const ParamView> params, AdamWState& st, double lr, const TrainConfig& cfg);

struct SchedulerState {
    double best_validation_loss = std::numeric_limits<double>::infinity();
    std::size_t epochs_since_improvement = 0;
    double current_lr = 1e-3;

    static SchedulerState initial(const TrainConfig& cfg);
};

/// Reduce-on-plateau: strict improvement resets the counter; once the counter exceeds
/// the patience the rate is multiplied by the factor (clamped at the floor).
double plateau_step(double validation_loss, SchedulerState& st, const TrainConfig& cfg);

struct EpochRecord {
    double train_loss = 0.0;
    double validation_loss = 0.0;
    double lr = 0.0;

    friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0; // 0-based
    double best_validation_loss = 0.0;
    double wall_seconds = 0.0; // not part of any persisted report
};

struct FoldResult {
    SEMLPModel model; // best-validation snapshot
    TrainReport report;
};

/// Mini-batch training on normalized matrices. A trailing batch of one sample is merged
/// into the previous batch (batchnorm needs two). `seed` drives shuffling and dropout.
FoldResult train_fold(SEMLPModel model, const DesignMatrices& train, const DesignMatrices& validation,
                      const TrainConfig& cfg, std::uint64_t seed);

/// Metrics in physical units for normalized predictions of `indices`.
MetricReport evaluate_predictions(const Dataset& data, std::span<const std::size_t> indices, const NormParams& np,
                                  const Matrix& normalized_pred);
/// Eval-mode predictions of a model that carries its norm params.
MetricReport evaluate_model(const SEMLPModel& model, const Dataset& data, std::span<const std::size_t> indices);

struct FoldData {
    std::size_t fold = 0;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> validation_indices;
    NormParams norm; // fitted on the training indices only
    DesignMatrices train;
    DesignMatrices validation;
};

FoldData prepare_fold(const Dataset& data, const FoldSplit& split, std::size_t fold);

/// Fold partition used by every run with this config.
FoldSplit fold_split_for(const Dataset& data, const TrainConfig& cfg);

struct FoldReport {
    std::size_t fold = 0;
    MetricReport metrics;
    TrainReport train;
    SEMLPModel model;
    NormParams norm;
};

struct CrossValidationReport {
    SEMLPConfig model_config;
    std::vector<FoldReport> folds;
    MetricReport average;
    std::uint32_t fold_checksum = 0;
};

enum class Execution { serial, parallel };

CrossValidationReport cross_validate(const Dataset& data, const TrainConfig& cfg, const SEMLPConfig& model_config,
                                     Execution exec = Execution::serial);

struct AblationReport {
    std::vector<CrossValidationReport> variants; // mlp, mlp-se, se-mlp
    std::uint32_t fold_checksum = 0;
};

/// The three variants on identical folds, initial seeds and data order.
AblationReport ablation_suite(const Dataset& data, const TrainConfig& cfg, const SEMLPConfig& base,
                              Execution exec = Execution::serial);

} // namespace semlp
