#include "semlp/cli.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "semlp/config.hpp"
#include "semlp/error.hpp"
#include "semlp/gradcheck.hpp"
#include "semlp/io.hpp"
#include "semlp/report.hpp"
#include "semlp/serialize.hpp"

namespace semlp {

namespace fs = std::filesystem;

namespace {

using Json = nlohmann::ordered_json;

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Raised for problems detected before any work starts.
class UsageError : public Error {
public:
    using Error::Error;
};

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string variant;
    std::string out_dir = ".";
    std::string format = "csv";
    bool no_noise = false;
    std::vector<std::string> settings;

    std::string dataset;
    std::string model;
    std::string norm_params;
    int fold = 0; // 1-based; 0 means the whole dataset

    double mass = 0.0;
    double velocity = 0.0;
    int grade = 0;
    int layers = 0;
    int layer_index = 0;

    std::size_t gradcheck_seeds = 20;
};

RunConfig resolve_config(const Options& o) {
    RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
    for (const std::string& s : o.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(fmt::format("--set expects key=value, got '{}'", s));
        }
        apply_setting(cfg, std::string_view(s).substr(0, eq), std::string_view(s).substr(eq + 1));
    }
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (!o.variant.empty()) {
        apply_setting(cfg, "model.variant", o.variant);
    }
    if (o.no_noise) {
        cfg.generator.noise_enabled = false;
    }
    cfg.validate();
    return cfg;
}

Json config_json(const RunConfig& cfg) {
    Json j = Json::object();
    std::istringstream in(format_run_config(cfg));
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find(" = ");
        j[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return j;
}

std::string file_checksum(const fs::path& p) { return format_checksum(crc32_of(read_binary_file(p))); }

void require_path(const std::string& value, const char* flag) {
    if (value.empty()) {
        throw UsageError(fmt::format("{} is required", flag));
    }
}

void write_manifest(const fs::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

void write_reports(const fs::path& dir, const std::string& stem, const std::string& csv, const std::string& json) {
    write_file_atomic(dir / (stem + ".csv"), csv);
    write_file_atomic(dir / (stem + ".json"), json);
}

int cmd_gen_data(const Options& o, std::ostream& out) {
    const RunConfig cfg = resolve_config(o);
    const GeneratorConfig gen = cfg.generator_with_seed();
    const Dataset data = generate_dataset(cfg.grid, gen);

    const fs::path dir = o.out_dir;
    fs::create_directories(dir);
    const fs::path csv = dir / "dataset.csv";
    write_dataset(data, csv);
    Json manifest;
    manifest["kind"] = "dataset";
    manifest["seed"] = cfg.seed;
    manifest["generator_seed"] = gen.seed;
    manifest["config"] = config_json(cfg);
    manifest["sample_count"] = data.size();
    manifest["crc32"] = file_checksum(csv);
    write_manifest(dir / "dataset.manifest.json", manifest);
    out << fmt::format("wrote {} samples to {} (crc32 {})\n", data.size(), csv.string(),
                       manifest["crc32"].get<std::string>());
    return 0;
}

int cmd_train(const Options& o, std::ostream& out) {
    require_path(o.dataset, "--dataset");
    const RunConfig cfg = resolve_config(o);
    const Dataset data = read_dataset(o.dataset);
    const CrossValidationReport cv = cross_validate(data, cfg.train_with_seed(), cfg.model, Execution::parallel);

    const fs::path dir = o.out_dir;
    fs::create_directories(dir);
    Json manifest;
    manifest["kind"] = "train";
    manifest["seed"] = cfg.seed;
    manifest["model_type"] = variant_label(cfg.model.variant());
    manifest["config"] = config_json(cfg);
    manifest["dataset_crc32"] = format_checksum(crc32_of(read_binary_file(o.dataset)));
    manifest["fold_checksum"] = format_checksum(cv.fold_checksum);
    manifest["folds"] = Json::array();
    for (const FoldReport& f : cv.folds) {
        const std::string model_name = fmt::format("fold_{}.model", f.fold + 1);
        const std::string norm_name = fmt::format("fold_{}.norm", f.fold + 1);
        save_model(f.model, dir / model_name);
        persist_norm_params(f.norm, dir / norm_name);
        manifest["folds"].push_back({{"fold", f.fold + 1},
                                     {"model", model_name},
                                     {"model_crc32", file_checksum(dir / model_name)},
                                     {"norm_params", norm_name},
                                     {"norm_params_crc32", format_checksum(norm_params_checksum(f.norm))},
                                     {"best_epoch", f.train.best_epoch + 1},
                                     {"best_validation_loss", f.train.best_validation_loss}});
    }
    const std::string csv = cv_report(cv, ReportFormat::csv);
    const std::string json = cv_report(cv, ReportFormat::json);
    write_reports(dir, "cv_report", csv, json);
    write_manifest(dir / "train.manifest.json", manifest);
    out << (parse_report_format(o.format) == ReportFormat::csv ? csv : json);
    return 0;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream& err) {
    require_path(o.model, "--model");
    require_path(o.norm_params, "--norm-params");
    const ReportFormat format = parse_report_format(o.format);
    const Condition c{o.mass, o.velocity, o.grade, o.layers};
    c.validate_physical(o.layer_index);

    const SEMLPModel model = load_paired(o.model, o.norm_params);
    const FeatureVector features = normalize_features(c, o.layer_index, *model.norm_params());
    std::vector<std::string> warnings;
    const Matrix pred = model.predict(Matrix::from_data(1, kInputFeatures, {features.begin(), features.end()}),
                                      &warnings);
    for (const std::string& w : warnings) {
        err << "warning: " << w << '\n';
    }
    const PhysicalTargets t = denormalize_outputs(pred(0, 0), pred(0, 1), model.norm_params());
    if (format == ReportFormat::json) {
        Json j;
        j["peak_g"] = t.peak;
        j["width_ms"] = t.width;
        j["extrapolated"] = !warnings.empty();
        out << j.dump(2) << '\n';
    } else {
        out << fmt::format("peak_g = {}\nwidth_ms = {}\n", t.peak, t.width);
    }
    return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
    require_path(o.model, "--model");
    require_path(o.norm_params, "--norm-params");
    require_path(o.dataset, "--dataset");
    const RunConfig cfg = resolve_config(o);
    const ReportFormat format = parse_report_format(o.format);
    const Dataset data = read_dataset(o.dataset);
    const SEMLPModel model = load_paired(o.model, o.norm_params);

    std::vector<std::size_t> indices;
    std::string label = "all";
    if (o.fold > 0) {
        const FoldSplit split = fold_split_for(data, cfg.train_with_seed());
        if (static_cast<std::size_t>(o.fold) > split.k()) {
            throw UsageError(fmt::format("--fold {} outside [1, {}]", o.fold, split.k()));
        }
        indices = split.validation_indices(static_cast<std::size_t>(o.fold - 1));
        label = fmt::format("{}-fold", o.fold);
    } else {
        indices.resize(data.size());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            indices[i] = i;
        }
    }
    const std::vector<ReportRow> rows{{label, evaluate_model(model, data, indices)}};

    const fs::path dir = o.out_dir;
    fs::create_directories(dir);
    const std::string csv = metric_table_csv(rows);
    const std::string json = metric_table_json(rows);
    write_reports(dir, "evaluation", csv, json);
    out << (format == ReportFormat::csv ? csv : json);
    return 0;
}

int cmd_ablate(const Options& o, std::ostream& out) {
    require_path(o.dataset, "--dataset");
    const RunConfig cfg = resolve_config(o);
    const ReportFormat format = parse_report_format(o.format);
    const Dataset data = read_dataset(o.dataset);
    const AblationReport ab = ablation_suite(data, cfg.train_with_seed(), cfg.model, Execution::parallel);

    const fs::path dir = o.out_dir;
    fs::create_directories(dir);
    const std::string csv = ablation_report(ab, ReportFormat::csv);
    const std::string json = ablation_report(ab, ReportFormat::json);
    write_reports(dir, "ablation", csv, json);
    out << (format == ReportFormat::csv ? csv : json);
    for (const CrossValidationReport& cv : ab.variants) {
        out << fmt::format("fold checksum {}: {}\n", variant_label(cv.model_config.variant()),
                           format_checksum(cv.fold_checksum));
    }
    return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
    const ReportFormat format = parse_report_format(o.format);
    GradcheckOptions opts;
    opts.seeds = o.gradcheck_seeds;
    const GradcheckReport r = run_gradcheck(opts);
    out << gradcheck_report(r, format);
    if (format == ReportFormat::csv) {
        out << fmt::format("worst relative error {:.3e} over {} seeds: {}\n", r.worst_relative_error, r.seeds,
                           r.passed ? "PASS" : "FAIL");
    }
    if (!r.passed) {
        for (const LayerCheck& l : r.layers) {
            if (!l.passed) {
                out << fmt::format("failed: {} at {} (relative error {:.3e})\n", l.layer, l.worst_parameter,
                                   l.worst_relative_error);
            }
        }
        return kExitFailure;
    }
    return 0;
}

void add_common(CLI::App* sub, Options& o) {
    sub->add_option("--config", o.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "top-level seed");
    sub->add_option("--variant", o.variant, "mlp | mlp-se | se-mlp");
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--format", o.format, "csv | json");
    sub->add_option("--set", o.settings, "override one config key, key=value");
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"SE-MLP penetration acceleration feature predictor", "semlp"};
    app.require_subcommand(1);
    Options o;

    CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
    add_common(gen, o);
    gen->add_flag("--no-noise", o.no_noise, "disable generator noise");

    CLI::App* train = app.add_subcommand("train", "cross-validate one variant and save per-fold models");
    add_common(train, o);
    train->add_option("--dataset", o.dataset, "dataset CSV")->required();

    CLI::App* predict = app.add_subcommand("predict", "predict one layer of one condition");
    predict->add_option("--format", o.format, "csv | json");
    predict->add_option("--model", o.model, "model file")->required();
    predict->add_option("--norm-params", o.norm_params, "normalization parameter file")->required();
    predict->add_option("--mass", o.mass, "warhead mass, kg")->required();
    predict->add_option("--velocity", o.velocity, "impact velocity, m/s")->required();
    predict->add_option("--grade", o.grade, "concrete grade, e.g. 40")->required();
    predict->add_option("--layers", o.layers, "number of target layers")->required();
    predict->add_option("--layer-index", o.layer_index, "1-based layer")->required();

    CLI::App* evaluate = app.add_subcommand("evaluate", "metrics of a saved model on a dataset");
    add_common(evaluate, o);
    evaluate->add_option("--dataset", o.dataset, "dataset CSV")->required();
    evaluate->add_option("--model", o.model, "model file")->required();
    evaluate->add_option("--norm-params", o.norm_params, "normalization parameter file")->required();
    evaluate->add_option("--fold", o.fold, "evaluate on this fold's validation split (1-based)");

    CLI::App* ablate = app.add_subcommand("ablate", "compare the three variants on shared folds");
    add_common(ablate, o);
    ablate->add_option("--dataset", o.dataset, "dataset CSV")->required();

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gradcheck->add_option("--format", o.format, "csv | json");
    gradcheck->add_option("--seeds", o.gradcheck_seeds, "number of random seeds")->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (*gen) {
            return cmd_gen_data(o, out);
        }
        if (*train) {
            return cmd_train(o, out);
        }
        if (*predict) {
            return cmd_predict(o, out, err);
        }
        if (*evaluate) {
            return cmd_evaluate(o, out);
        }
        if (*ablate) {
            return cmd_ablate(o, out);
        }
        return cmd_gradcheck(o, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

} // namespace semlp
