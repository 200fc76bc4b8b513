#include "semlp/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "semlp/error.hpp"
#include "semlp/io.hpp"
#include "semlp/rng.hpp"

namespace semlp {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

template <typename T>
T parse_value(std::string_view key, std::string_view text) {
    text = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ConfigError(fmt::format("config: '{}' is not a valid value for {}", text, key));
    }
    return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
    text = trim(text);
    if (text == "true" || text == "1") {
        return true;
    }
    if (text == "false" || text == "0") {
        return false;
    }
    throw ConfigError(fmt::format("config: '{}' is not a boolean for {}", text, key));
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
    std::vector<T> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::size_t end = comma == std::string_view::npos ? text.size() : comma;
        out.push_back(parse_value<T>(key, text.substr(start, end - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
    return fmt::format("{}", fmt::join(values, ","));
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;

template <typename T, typename Field>
Setter number(Field field) {
    return [field](RunConfig& c, std::string_view key, std::string_view v) { field(c) = parse_value<T>(key, v); };
}

const std::map<std::string, Setter, std::less<>>& setters() {
    static const std::map<std::string, Setter, std::less<>> table = {
        {"seed", number<std::uint64_t>([](RunConfig& c) -> auto& { return c.seed; })},
        {"grid.masses", [](RunConfig& c, std::string_view k, std::string_view v) { c.grid.masses = parse_list<double>(k, v); }},
        {"grid.velocity_min", number<double>([](RunConfig& c) -> auto& { return c.grid.velocity_min; })},
        {"grid.velocity_max", number<double>([](RunConfig& c) -> auto& { return c.grid.velocity_max; })},
        {"grid.velocity_step", number<double>([](RunConfig& c) -> auto& { return c.grid.velocity_step; })},
        {"grid.grades", [](RunConfig& c, std::string_view k, std::string_view v) { c.grid.grades = parse_list<int>(k, v); }},
        {"grid.layer_count_min", number<int>([](RunConfig& c) -> auto& { return c.grid.layer_count_min; })},
        {"grid.layer_count_max", number<int>([](RunConfig& c) -> auto& { return c.grid.layer_count_max; })},
        {"generator.peak_coefficient", number<double>([](RunConfig& c) -> auto& { return c.generator.peak_coefficient; })},
        {"generator.velocity_exponent", number<double>([](RunConfig& c) -> auto& { return c.generator.velocity_exponent; })},
        {"generator.width_coefficient", number<double>([](RunConfig& c) -> auto& { return c.generator.width_coefficient; })},
        {"generator.hardening", number<double>([](RunConfig& c) -> auto& { return c.generator.hardening; })},
        {"generator.first_thickness", number<double>([](RunConfig& c) -> auto& { return c.generator.first_thickness; })},
        {"generator.other_thickness", number<double>([](RunConfig& c) -> auto& { return c.generator.other_thickness; })},
        {"generator.noise_sigma_peak", number<double>([](RunConfig& c) -> auto& { return c.generator.noise_sigma_peak; })},
        {"generator.noise_sigma_width", number<double>([](RunConfig& c) -> auto& { return c.generator.noise_sigma_width; })},
        {"generator.noise_enabled", [](RunConfig& c, std::string_view k, std::string_view v) { c.generator.noise_enabled = parse_bool(k, v); }},
        {"generator.v_min", number<double>([](RunConfig& c) -> auto& { return c.generator.v_min; })},
        {"train.batch_size", number<std::size_t>([](RunConfig& c) -> auto& { return c.train.batch_size; })},
        {"train.max_epochs", number<std::size_t>([](RunConfig& c) -> auto& { return c.train.max_epochs; })},
        {"train.lr0", number<double>([](RunConfig& c) -> auto& { return c.train.lr0; })},
        {"train.weight_decay", number<double>([](RunConfig& c) -> auto& { return c.train.weight_decay; })},
        {"train.plateau_factor", number<double>([](RunConfig& c) -> auto& { return c.train.plateau_factor; })},
        {"train.plateau_patience", number<std::size_t>([](RunConfig& c) -> auto& { return c.train.plateau_patience; })},
        {"train.lr_floor", number<double>([](RunConfig& c) -> auto& { return c.train.lr_floor; })},
        {"train.loss_weight_peak", number<double>([](RunConfig& c) -> auto& { return c.train.loss_weights.peak; })},
        {"train.loss_weight_width", number<double>([](RunConfig& c) -> auto& { return c.train.loss_weights.width; })},
        {"train.k_folds", number<std::size_t>([](RunConfig& c) -> auto& { return c.train.k_folds; })},
        {"train.beta1", number<double>([](RunConfig& c) -> auto& { return c.train.beta1; })},
        {"train.beta2", number<double>([](RunConfig& c) -> auto& { return c.train.beta2; })},
        {"train.adam_epsilon", number<double>([](RunConfig& c) -> auto& { return c.train.adam_epsilon; })},
        {"model.hidden_dims",
         [](RunConfig& c, std::string_view k, std::string_view v) {
             const auto dims = parse_list<std::size_t>(k, v);
             if (dims.size() != 3) {
                 throw ConfigError("config: model.hidden_dims needs exactly three widths");
             }
             std::copy(dims.begin(), dims.end(), c.model.hidden_dims.begin());
         }},
        {"model.reduction_ratio", number<std::size_t>([](RunConfig& c) -> auto& { return c.model.reduction_ratio; })},
        {"model.dropout_rate", number<double>([](RunConfig& c) -> auto& { return c.model.dropout_rate; })},
        {"model.variant",
         [](RunConfig& c, std::string_view, std::string_view v) {
             const Variant variant = parse_variant(trim(v));
             c.model.use_se = variant != Variant::mlp;
             c.model.use_residual = variant == Variant::se_mlp;
         }},
    };
    return table;
}

} // namespace

void RunConfig::validate() const {
    grid.validate();
    generator.validate();
    train.validate();
    model.validate();
}

std::uint64_t generator_seed(std::uint64_t seed) noexcept { return derive_seed(seed, "generation"); }

GeneratorConfig RunConfig::generator_with_seed() const {
    GeneratorConfig g = generator;
    g.seed = generator_seed(seed);
    return g;
}

TrainConfig RunConfig::train_with_seed() const {
    TrainConfig t = train;
    t.seed = seed;
    return t;
}

void apply_setting(RunConfig& cfg, std::string_view key, std::string_view value) {
    const auto it = setters().find(trim(key));
    if (it == setters().end()) {
        throw ConfigError(fmt::format("config: unknown key '{}'", trim(key)));
    }
    it->second(cfg, it->first, value);
}

RunConfig parse_run_config(std::string_view text) {
    RunConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view view = line;
        if (const auto hash = view.find('#'); hash != std::string_view::npos) {
            view = view.substr(0, hash);
        }
        view = trim(view);
        if (view.empty()) {
            continue;
        }
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError(fmt::format("config line {}: expected 'key = value'", line_no));
        }
        try {
            apply_setting(cfg, view.substr(0, eq), view.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("config line {}: {}", line_no, e.what()));
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    try {
        return parse_run_config(read_text_file(path));
    } catch (const LoadError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

std::string format_run_config(const RunConfig& c) {
    std::string out;
    const auto line = [&out](std::string_view key, const auto& value) { out += fmt::format("{} = {}\n", key, value); };
    line("seed", c.seed);
    line("grid.masses", join(c.grid.masses));
    line("grid.velocity_min", c.grid.velocity_min);
    line("grid.velocity_max", c.grid.velocity_max);
    line("grid.velocity_step", c.grid.velocity_step);
    line("grid.grades", join(c.grid.grades));
    line("grid.layer_count_min", c.grid.layer_count_min);
    line("grid.layer_count_max", c.grid.layer_count_max);
    line("generator.peak_coefficient", c.generator.peak_coefficient);
    line("generator.velocity_exponent", c.generator.velocity_exponent);
    line("generator.width_coefficient", c.generator.width_coefficient);
    line("generator.hardening", c.generator.hardening);
    line("generator.first_thickness", c.generator.first_thickness);
    line("generator.other_thickness", c.generator.other_thickness);
    line("generator.noise_sigma_peak", c.generator.noise_sigma_peak);
    line("generator.noise_sigma_width", c.generator.noise_sigma_width);
    line("generator.noise_enabled", c.generator.noise_enabled ? "true" : "false");
    line("generator.v_min", c.generator.v_min);
    line("train.batch_size", c.train.batch_size);
    line("train.max_epochs", c.train.max_epochs);
    line("train.lr0", c.train.lr0);
    line("train.weight_decay", c.train.weight_decay);
    line("train.plateau_factor", c.train.plateau_factor);
    line("train.plateau_patience", c.train.plateau_patience);
    line("train.lr_floor", c.train.lr_floor);
    line("train.loss_weight_peak", c.train.loss_weights.peak);
    line("train.loss_weight_width", c.train.loss_weights.width);
    line("train.k_folds", c.train.k_folds);
    line("train.beta1", c.train.beta1);
    line("train.beta2", c.train.beta2);
    line("train.adam_epsilon", c.train.adam_epsilon);
    line("model.hidden_dims", join(std::vector<std::size_t>(c.model.hidden_dims.begin(), c.model.hidden_dims.end())));
    line("model.reduction_ratio", c.model.reduction_ratio);
    line("model.dropout_rate", c.model.dropout_rate);
    line("model.variant", variant_name(c.model.variant()));
    return out;
}

} // namespace semlp
