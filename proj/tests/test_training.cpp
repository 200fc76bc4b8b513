#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "semlp/error.hpp"
#include "semlp/gradcheck.hpp"
#include "semlp/training.hpp"
#include "test_helpers.hpp"

using namespace semlp;

namespace {

Dataset noise_free_corpus() {
    GeneratorConfig g;
    g.noise_enabled = false;
    return generate_dataset(GridSpec{}, g);
}

TrainConfig quick_config(std::size_t epochs) {
    TrainConfig cfg;
    cfg.max_epochs = epochs;
    cfg.seed = 5;
    return cfg;
}

SEMLPConfig small_model() {
    SEMLPConfig c;
    c.hidden_dims = {16, 16, 16};
    return c;
}

} // namespace

TEST_SUITE("training") {
    TEST_CASE("weighted MSE toy value and gradient") {
        // per-target MSEs of 1 (peak) and 2 (width)
        const Matrix pred = Matrix::from_rows({{1, 2}, {1, 0}});
        const Matrix target = Matrix::from_rows({{0, 0}, {0, 0}});
        const LossResult r = wmse_loss(pred, target, LossWeights{});
        CHECK(r.value == doctest::Approx(1.3).epsilon(1e-15));

        const Matrix p = test::random_matrix(7, 2, 3);
        const Matrix t = test::random_matrix(7, 2, 4);
        const LossResult lr = wmse_loss(p, t, LossWeights{});
        Matrix probe = p;
        const auto numeric = finite_difference_grad(
            [&] { return wmse_loss(probe, t, LossWeights{}).value; }, probe.data(), 1e-6);
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            CHECK(std::abs(numeric[i] - lr.grad.data()[i]) < 1e-8);
        }
        CHECK_THROWS_AS((void)wmse_loss(Matrix(2, 3), Matrix(2, 3), LossWeights{}), DimensionError);
        CHECK_THROWS_AS((void)wmse_loss(Matrix(2, 2), Matrix(3, 2), LossWeights{}), DimensionError);
    }

    TEST_CASE("AdamW first step matches the hand value") {
        std::vector<double> w{1.0};
        std::vector<double> g{1.0};
        const std::vector<ParamView> params{{"w", w, g}};
        AdamWState st;
        adamw_step(params, st, 1e-3, TrainConfig{});
        CHECK(st.t == 1);
        CHECK(std::abs(w[0] - 0.9989999000099999) <= 1e-7);
        CHECK(w[0] == doctest::Approx(0.9989999000099999).epsilon(1e-13));
    }

    TEST_CASE("weight decay applies even with zero gradient") {
        std::vector<double> w{2.0};
        std::vector<double> g{0.0};
        const std::vector<ParamView> params{{"w", w, g}};
        AdamWState st;
        adamw_step(params, st, 1e-3, TrainConfig{});
        CHECK(w[0] == doctest::Approx(2.0 - 1e-3 * 1e-4 * 2.0).epsilon(1e-15));
    }

    TEST_CASE("plateau scheduler halves after the patience runs out") {
        const TrainConfig cfg;
        SchedulerState st = SchedulerState::initial(cfg);
        CHECK(plateau_step(1.0, st, cfg) == 1e-3);
        for (int e = 0; e < 15; ++e) {
            CHECK(plateau_step(1.0, st, cfg) == 1e-3);
        }
        CHECK(plateau_step(1.0, st, cfg) == 5e-4);
        CHECK(st.epochs_since_improvement == 0);
        // an improvement resets the counter
        for (int e = 0; e < 10; ++e) {
            (void)plateau_step(1.0, st, cfg);
        }
        CHECK(plateau_step(0.5, st, cfg) == 5e-4);
        for (int e = 0; e < 15; ++e) {
            CHECK(plateau_step(0.5, st, cfg) == 5e-4);
        }
        CHECK(plateau_step(0.5, st, cfg) == 2.5e-4);
    }

    TEST_CASE("plateau scheduler clamps at the floor") {
        const TrainConfig cfg;
        SchedulerState st = SchedulerState::initial(cfg);
        st.current_lr = 1.5e-6;
        (void)plateau_step(1.0, st, cfg);
        for (int e = 0; e < 16; ++e) {
            (void)plateau_step(1.0, st, cfg);
        }
        CHECK(st.current_lr == 1e-6);
        for (int e = 0; e < 100; ++e) {
            CHECK(plateau_step(1.0, st, cfg) == 1e-6);
        }
    }

    TEST_CASE("config validation") {
        TrainConfig cfg;
        cfg.batch_size = 1;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = TrainConfig{};
        cfg.loss_weights = {0.5, 0.6};
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
        cfg = TrainConfig{};
        cfg.lr_floor = 1e-2;
        CHECK_THROWS_AS(cfg.validate(), ConfigError);
    }

    TEST_CASE("train_fold is deterministic and keeps the best-validation snapshot") {
        const Dataset d = noise_free_corpus();
        const TrainConfig cfg = quick_config(6);
        const FoldData fd = prepare_fold(d, fold_split_for(d, cfg), 0);
        Rng init(1);
        const SEMLPModel model = SEMLPModel::build(small_model(), init);
        const FoldResult a = train_fold(model, fd.train, fd.validation, cfg, 77);
        const FoldResult b = train_fold(model, fd.train, fd.validation, cfg, 77);
        CHECK(a.report.epochs == b.report.epochs);
        CHECK(a.model.predict(fd.validation.x) == b.model.predict(fd.validation.x));
        REQUIRE(a.report.epochs.size() == 6);

        const auto best = std::min_element(a.report.epochs.begin(), a.report.epochs.end(),
                                           [](const EpochRecord& x, const EpochRecord& y) {
                                               return x.validation_loss < y.validation_loss;
                                           });
        CHECK(a.report.best_epoch == static_cast<std::size_t>(best - a.report.epochs.begin()));
        const double snapshot_loss = wmse_loss(a.model.predict(fd.validation.x), fd.validation.y, cfg.loss_weights).value;
        CHECK(snapshot_loss == a.report.best_validation_loss);
    }

    TEST_CASE("a trailing batch of one sample is merged, not fed to batchnorm alone") {
        const DesignMatrices train{test::random_matrix(33, 5, 1, 0, 1), test::random_matrix(33, 2, 2, 0.1, 0.9)};
        const DesignMatrices val{test::random_matrix(5, 5, 3, 0, 1), test::random_matrix(5, 2, 4, 0.1, 0.9)};
        Rng init(1);
        const SEMLPModel model = SEMLPModel::build(small_model(), init);
        CHECK_NOTHROW((void)train_fold(model, train, val, quick_config(2), 1));
    }

    TEST_CASE("cross-validation: serial equals parallel, average is the fold mean") {
        const Dataset d = noise_free_corpus();
        const TrainConfig cfg = quick_config(3);
        const CrossValidationReport s = cross_validate(d, cfg, small_model(), Execution::serial);
        const CrossValidationReport p = cross_validate(d, cfg, small_model(), Execution::parallel);
        REQUIRE(s.folds.size() == 4);
        CHECK(s.fold_checksum == p.fold_checksum);
        CHECK(s.average == p.average);
        double mean_r2 = 0.0;
        for (std::size_t f = 0; f < 4; ++f) {
            CHECK(s.folds[f].metrics == p.folds[f].metrics);
            CHECK(s.folds[f].train.epochs == p.folds[f].train.epochs);
            mean_r2 += s.folds[f].metrics.peak.r2 / 4.0;
        }
        CHECK(std::abs(s.average.peak.r2 - mean_r2) <= 1e-12);
    }

    TEST_CASE("ablation variants share folds and report in a fixed order") {
        const Dataset d = noise_free_corpus();
        const AblationReport ab = ablation_suite(d, quick_config(2), small_model(), Execution::parallel);
        REQUIRE(ab.variants.size() == 3);
        CHECK(ab.variants[0].model_config.variant() == Variant::mlp);
        CHECK(ab.variants[1].model_config.variant() == Variant::mlp_se);
        CHECK(ab.variants[2].model_config.variant() == Variant::se_mlp);
        for (const auto& v : ab.variants) {
            CHECK(v.fold_checksum == ab.fold_checksum);
            CHECK(v.model_config.hidden_dims == small_model().hidden_dims);
        }
        CHECK(ab.fold_checksum == fold_split_for(d, quick_config(2)).checksum());
    }

    TEST_CASE("evaluating a model without norm params is a state error") {
        Rng init(1);
        const SEMLPModel model = SEMLPModel::build(small_model(), init);
        const Dataset d = noise_free_corpus();
        const std::vector<std::size_t> idx{0, 1, 2};
        CHECK_THROWS_AS((void)evaluate_model(model, d, idx), StateError);
    }
}
