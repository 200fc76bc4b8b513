#include "semlp/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>

#include <fmt/format.h>

#include "semlp/error.hpp"
#include "semlp/kernels.hpp"

namespace semlp {

void TrainConfig::validate() const {
    if (batch_size < 2) {
        throw ConfigError("train config: batch_size must be at least 2");
    }
    if (max_epochs == 0) {
        throw ConfigError("train config: max_epochs must be positive");
    }
    if (!(lr_floor > 0.0 && lr0 > lr_floor)) {
        throw ConfigError("train config: need lr0 > lr_floor > 0");
    }
    if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) {
        throw ConfigError("train config: plateau_factor must be in (0, 1)");
    }
    if (!(weight_decay >= 0.0)) {
        throw ConfigError("train config: weight_decay must be non-negative");
    }
    if (!(loss_weights.peak >= 0.0 && loss_weights.width >= 0.0) ||
        std::abs(loss_weights.peak + loss_weights.width - 1.0) > 1e-12) {
        throw ConfigError("train config: loss weights must be non-negative and sum to 1");
    }
    if (k_folds < 2) {
        throw ConfigError("train config: k_folds must be at least 2");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && adam_epsilon > 0.0)) {
        throw ConfigError("train config: betas must be in [0, 1) and adam_epsilon positive");
    }
}

LossResult wmse_loss(const Matrix& pred, const Matrix& target, const LossWeights& w) {
    require_same_shape(pred, target, "wmse_loss");
    if (pred.cols() != kOutputTargets || pred.rows() == 0) {
        throw DimensionError("wmse_loss: expected n x 2 with n > 0, got " + pred.shape_string());
    }
    const auto n = static_cast<double>(pred.rows());
    const double weights[2] = {w.peak, w.width};
    LossResult r{0.0, Matrix(pred.rows(), pred.cols())};
    for (std::size_t c = 0; c < 2; ++c) {
        double sse = 0.0;
        for (std::size_t i = 0; i < pred.rows(); ++i) {
            const double d = pred(i, c) - target(i, c);
            sse += d * d;
            r.grad(i, c) = 2.0 * weights[c] * d / n;
        }
        r.value += weights[c] * (sse / n);
    }
    return r;
}

void adamw_step(std::span<const ParamView> params, AdamWState& st, double lr, const TrainConfig& cfg) {
    if (st.m.size() != params.size()) {
        st.m.assign(params.size(), {});
        st.v.assign(params.size(), {});
        for (std::size_t i = 0; i < params.size(); ++i) {
            st.m[i].assign(params[i].value.size(), 0.0);
            st.v[i].assign(params[i].value.size(), 0.0);
        }
        st.t = 0;
    }
    ++st.t;
    kernels::AdamWHyper h;
    h.lr = lr;
    h.beta1 = cfg.beta1;
    h.beta2 = cfg.beta2;
    h.epsilon = cfg.adam_epsilon;
    h.weight_decay = cfg.weight_decay;
    h.bias_correction1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    h.bias_correction2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        kernels::adamw_update(params[i].value, params[i].grad, st.m[i], st.v[i], h);
    }
}

SchedulerState SchedulerState::initial(const TrainConfig& cfg) {
    SchedulerState st;
    st.current_lr = cfg.lr0;
    return st;
}

double plateau_step(double validation_loss, SchedulerState& st, const TrainConfig& cfg) {
    if (validation_loss < st.best_validation_loss) {
        st.best_validation_loss = validation_loss;
        st.epochs_since_improvement = 0;
    } else {
        ++st.epochs_since_improvement;
    }
    if (st.epochs_since_improvement > cfg.plateau_patience) {
        st.current_lr = std::max(st.current_lr * cfg.plateau_factor, cfg.lr_floor);
        st.epochs_since_improvement = 0;
    }
    return st.current_lr;
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> batch_ranges(std::size_t n, std::size_t batch_size) {
    std::vector<std::pair<std::size_t, std::size_t>> ranges;
    for (std::size_t begin = 0; begin < n; begin += batch_size) {
        ranges.emplace_back(begin, std::min(n, begin + batch_size));
    }
    if (ranges.size() >= 2 && ranges.back().second - ranges.back().first == 1) {
        ranges.pop_back();
        ranges.back().second = n;
    }
    return ranges;
}

} // namespace

FoldResult train_fold(SEMLPModel model, const DesignMatrices& train, const DesignMatrices& validation,
                      const TrainConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (train.x.rows() < 2 || validation.x.rows() == 0) {
        throw ConfigError(fmt::format("train_fold: need at least 2 training and 1 validation sample, got {} and {}",
                                      train.x.rows(), validation.x.rows()));
    }
    const auto started = std::chrono::steady_clock::now();
    Rng shuffle_rng(derive_seed(seed, "shuffle"));
    Rng dropout_rng(derive_seed(seed, "dropout"));
    std::vector<std::size_t> order(train.x.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});

    AdamWState adam;
    SchedulerState sched = SchedulerState::initial(cfg);
    FoldResult result{model, {}};
    result.report.best_validation_loss = std::numeric_limits<double>::infinity();
    const auto params = model.parameters();
    ForwardCache cache;

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double lr = sched.current_lr;
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        for (const auto& [begin, end] : batch_ranges(order.size(), cfg.batch_size)) {
            const std::span<const std::size_t> rows(order.data() + begin, end - begin);
            const Matrix xb = select_rows(train.x, rows);
            const Matrix yb = select_rows(train.y, rows);
            model.zero_grad();
            const Matrix pred = model.forward(xb, Mode::train, &dropout_rng, &cache);
            const LossResult loss = wmse_loss(pred, yb, cfg.loss_weights);
            model.backward(cache, loss.grad);
            adamw_step(params, adam, lr, cfg);
            loss_sum += loss.value * static_cast<double>(rows.size());
        }
        const double val_loss = wmse_loss(model.predict(validation.x), validation.y, cfg.loss_weights).value;
        result.report.epochs.push_back({loss_sum / static_cast<double>(order.size()), val_loss, lr});
        if (val_loss < result.report.best_validation_loss) {
            result.report.best_validation_loss = val_loss;
            result.report.best_epoch = epoch;
            result.model = model;
        }
        plateau_step(val_loss, sched, cfg);
    }
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

MetricReport evaluate_predictions(const Dataset& data, std::span<const std::size_t> indices, const NormParams& np,
                                  const Matrix& normalized_pred) {
    if (normalized_pred.rows() != indices.size() || normalized_pred.cols() != kOutputTargets) {
        throw DimensionError(fmt::format("evaluate: predictions {} for {} samples", normalized_pred.shape_string(),
                                         indices.size()));
    }
    std::vector<double> peak_pred, peak_true, width_pred, width_true;
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const LayerSample& s = data.at(indices[r]);
        const PhysicalTargets p = denormalize_outputs(normalized_pred(r, 0), normalized_pred(r, 1), np);
        peak_pred.push_back(p.peak);
        width_pred.push_back(p.width);
        peak_true.push_back(s.peak);
        width_true.push_back(s.width);
    }
    return {evaluate_target(peak_pred, peak_true), evaluate_target(width_pred, width_true)};
}

MetricReport evaluate_model(const SEMLPModel& model, const Dataset& data, std::span<const std::size_t> indices) {
    if (!model.norm_params()) {
        throw StateError("evaluate_model: model carries no normalization parameters");
    }
    const DesignMatrices m = normalize_dataset(data, indices, *model.norm_params());
    return evaluate_predictions(data, indices, *model.norm_params(), model.predict(m.x));
}

FoldSplit fold_split_for(const Dataset& data, const TrainConfig& cfg) {
    return kfold_split(data.size(), cfg.k_folds, derive_seed(cfg.seed, "folds"));
}

FoldData prepare_fold(const Dataset& data, const FoldSplit& split, std::size_t fold) {
    FoldData f;
    f.fold = fold;
    f.train_indices = split.train_indices(fold);
    f.validation_indices = split.validation_indices(fold);
    f.norm = NormParams::fit(data, f.train_indices);
    f.train = normalize_dataset(data, f.train_indices, f.norm);
    f.validation = normalize_dataset(data, f.validation_indices, f.norm);
    return f;
}

namespace {

struct FoldJob {
    std::size_t variant_slot;
    std::size_t fold;
};

// Runs every (variant, fold) job; each job is independent, so serial and parallel
// execution produce the same numbers.
std::vector<std::vector<FoldReport>> run_jobs(const Dataset& data, const TrainConfig& cfg,
                                              std::span<const SEMLPConfig> configs, const FoldSplit& split,
                                              Execution exec) {
    std::vector<FoldJob> jobs;
    for (std::size_t v = 0; v < configs.size(); ++v) {
        for (std::size_t f = 0; f < split.k(); ++f) {
            jobs.push_back({v, f});
        }
    }
    std::vector<std::vector<FoldReport>> out(configs.size(), std::vector<FoldReport>(split.k()));
    std::vector<std::exception_ptr> errors(jobs.size());
    const auto run = [&](std::size_t j) {
        try {
            const FoldJob job = jobs[j];
            const FoldData fd = prepare_fold(data, split, job.fold);
            Rng init(derive_seed(cfg.seed, "init", job.fold));
            SEMLPModel model = build_variant(configs[job.variant_slot], init);
            model.set_norm_params(fd.norm);
            FoldResult trained = train_fold(std::move(model), fd.train, fd.validation, cfg,
                                            derive_seed(cfg.seed, "train", job.fold));
            FoldReport& rep = out[job.variant_slot][job.fold];
            rep.fold = job.fold;
            rep.metrics = evaluate_model(trained.model, data, fd.validation_indices);
            rep.train = std::move(trained.report);
            rep.model = std::move(trained.model);
            rep.norm = fd.norm;
        } catch (...) {
            errors[j] = std::current_exception();
        }
    };
    const auto count = static_cast<std::int64_t>(jobs.size());
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (std::int64_t j = 0; j < count; ++j) {
            run(static_cast<std::size_t>(j));
        }
    } else {
        for (std::int64_t j = 0; j < count; ++j) {
            run(static_cast<std::size_t>(j));
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return out;
}

CrossValidationReport assemble(const SEMLPConfig& config, std::vector<FoldReport> folds, std::uint32_t checksum) {
    CrossValidationReport r;
    r.model_config = config;
    r.folds = std::move(folds);
    std::vector<MetricReport> metrics;
    for (const FoldReport& f : r.folds) {
        metrics.push_back(f.metrics);
    }
    r.average = fold_aggregate(metrics);
    r.fold_checksum = checksum;
    return r;
}

} // namespace

CrossValidationReport cross_validate(const Dataset& data, const TrainConfig& cfg, const SEMLPConfig& model_config,
                                     Execution exec) {
    cfg.validate();
    model_config.validate();
    const FoldSplit split = fold_split_for(data, cfg);
    const SEMLPConfig configs[] = {model_config};
    auto results = run_jobs(data, cfg, configs, split, exec);
    return assemble(model_config, std::move(results[0]), split.checksum());
}

AblationReport ablation_suite(const Dataset& data, const TrainConfig& cfg, const SEMLPConfig& base, Execution exec) {
    cfg.validate();
    std::vector<SEMLPConfig> configs;
    for (const Variant v : {Variant::mlp, Variant::mlp_se, Variant::se_mlp}) {
        SEMLPConfig c = base;
        c.use_se = v != Variant::mlp;
        c.use_residual = v == Variant::se_mlp;
        c.validate();
        configs.push_back(c);
    }
    const FoldSplit split = fold_split_for(data, cfg);
    auto results = run_jobs(data, cfg, configs, split, exec);
    AblationReport report;
    report.fold_checksum = split.checksum();
    for (std::size_t v = 0; v < configs.size(); ++v) {
        report.variants.push_back(assemble(configs[v], std::move(results[v]), split.checksum()));
    }
    return report;
}

} // namespace semlp
