#include "semlp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "semlp/error.hpp"
#include "semlp/io.hpp"
#include "semlp/rng.hpp"

namespace semlp {

namespace {

constexpr double kGravity = 9.81;
constexpr double kGradeExponent = 0.4;
constexpr double kMassExponent = 0.33;
constexpr double kVelocityLow = 900.0;
constexpr double kVelocityHigh = 1700.0;
constexpr int kLayerCountLow = 6;
constexpr int kLayerCountHigh = 10;

bool is_known_grade(int grade) { return grade == 40 || grade == 60 || grade == 80; }

std::string describe(const Condition& c) {
    return fmt::format("(mass {} kg, velocity {} m/s, C{}, {} layers)", c.warhead_mass, c.velocity,
                       c.material_grade, c.layer_count);
}

} // namespace

void Condition::validate() const {
    if (!(warhead_mass > 0.0) || !std::isfinite(warhead_mass)) {
        throw DomainError("condition: mass must be positive, got " + std::to_string(warhead_mass));
    }
    if (!(velocity >= kVelocityLow && velocity <= kVelocityHigh)) {
        throw DomainError("condition: velocity must be in [900, 1700] m/s, got " + std::to_string(velocity));
    }
    if (!is_known_grade(material_grade)) {
        throw DomainError("condition: grade must be 40, 60 or 80, got " + std::to_string(material_grade));
    }
    if (layer_count < kLayerCountLow || layer_count > kLayerCountHigh) {
        throw DomainError("condition: layer count must be in [6, 10], got " + std::to_string(layer_count));
    }
}

void Condition::validate_physical(int layer_index) const {
    if (!(warhead_mass > 0.0) || !std::isfinite(warhead_mass)) {
        throw DomainError("condition: mass must be positive, got " + std::to_string(warhead_mass));
    }
    if (!(velocity > 0.0) || !std::isfinite(velocity)) {
        throw DomainError("condition: velocity must be positive, got " + std::to_string(velocity));
    }
    if (material_grade <= 0) {
        throw DomainError("condition: grade must be positive, got " + std::to_string(material_grade));
    }
    if (layer_count < 1) {
        throw DomainError("condition: layer count must be at least 1, got " + std::to_string(layer_count));
    }
    if (layer_index < 1 || layer_index > layer_count) {
        throw DomainError(fmt::format("condition: layer index {} outside [1, {}]", layer_index, layer_count));
    }
}

void LayerSample::validate() const {
    condition.validate();
    if (layer_index < 1 || layer_index > condition.layer_count) {
        throw DomainError(fmt::format("sample: layer index {} outside [1, {}]", layer_index, condition.layer_count));
    }
    if (!(peak > 0.0) || !std::isfinite(peak)) {
        throw DomainError("sample: peak must be positive, got " + std::to_string(peak));
    }
    if (!(width > 0.0) || !std::isfinite(width)) {
        throw DomainError("sample: width must be positive, got " + std::to_string(width));
    }
}

FeatureVector raw_features(const Condition& c, int layer_index) {
    return {c.warhead_mass, c.velocity, static_cast<double>(c.material_grade),
            static_cast<double>(c.layer_count), static_cast<double>(layer_index)};
}

void NormParams::validate() const {
    for (std::size_t i = 0; i < kInputFeatures; ++i) {
        if (!(x_max[i] > x_min[i])) {
            throw NormalizationError(fmt::format("norm params: feature {} is degenerate (min {} max {})", i,
                                                 x_min[i], x_max[i]));
        }
    }
    if (!(log_max > 0.0)) {
        throw NormalizationError("norm params: log_max must be positive");
    }
    if (!(width_max > 0.0)) {
        throw NormalizationError("norm params: width_max must be positive");
    }
}

NormParams NormParams::fit(const Dataset& data, std::span<const std::size_t> indices) {
    if (indices.empty()) {
        throw NormalizationError("norm params: cannot fit on an empty set");
    }
    NormParams np;
    np.x_min.fill(std::numeric_limits<double>::infinity());
    np.x_max.fill(-std::numeric_limits<double>::infinity());
    for (const std::size_t idx : indices) {
        const LayerSample& s = data.at(idx);
        const FeatureVector f = raw_features(s.condition, s.layer_index);
        for (std::size_t i = 0; i < kInputFeatures; ++i) {
            np.x_min[i] = std::min(np.x_min[i], f[i]);
            np.x_max[i] = std::max(np.x_max[i], f[i]);
        }
        np.log_max = std::max(np.log_max, std::log1p(s.peak));
        np.width_max = std::max(np.width_max, s.width);
    }
    np.validate();
    return np;
}

NormParams NormParams::fit(const Dataset& data) {
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i] = i;
    }
    return fit(data, all);
}

bool is_extrapolated(std::span<const double> normalized_features) noexcept {
    return std::any_of(normalized_features.begin(), normalized_features.end(),
                       [](double v) { return v < 0.0 || v > 1.0; });
}

FeatureVector normalize_features(const Condition& c, int layer_index, const NormParams& np, bool* extrapolated) {
    const FeatureVector raw = raw_features(c, layer_index);
    FeatureVector out{};
    for (std::size_t i = 0; i < kInputFeatures; ++i) {
        out[i] = (raw[i] - np.x_min[i]) / (np.x_max[i] - np.x_min[i]);
    }
    if (extrapolated != nullptr) {
        *extrapolated = is_extrapolated(out);
    }
    return out;
}

double normalize_peak(double peak, const NormParams& np) {
    if (!(peak >= 0.0)) {
        throw DomainError("normalize_peak: peak must be non-negative, got " + std::to_string(peak));
    }
    return std::log1p(peak) / np.log_max;
}

double normalize_width(double width, const NormParams& np) {
    if (!(width >= 0.0)) {
        throw DomainError("normalize_width: width must be non-negative, got " + std::to_string(width));
    }
    return width / np.width_max;
}

PhysicalTargets denormalize_outputs(double peak_normalized, double width_normalized, const NormParams& np) {
    return {std::expm1(peak_normalized * np.log_max), width_normalized * np.width_max};
}

PhysicalTargets denormalize_outputs(double peak_normalized, double width_normalized,
                                    const std::optional<NormParams>& np) {
    if (!np) {
        throw StateError("denormalize_outputs: no normalization parameters available");
    }
    return denormalize_outputs(peak_normalized, width_normalized, *np);
}

DesignMatrices normalize_dataset(const Dataset& data, std::span<const std::size_t> indices, const NormParams& np) {
    DesignMatrices m{Matrix(indices.size(), kInputFeatures), Matrix(indices.size(), kOutputTargets)};
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const LayerSample& s = data.at(indices[r]);
        const FeatureVector f = normalize_features(s.condition, s.layer_index, np);
        std::copy(f.begin(), f.end(), m.x.row(r).begin());
        m.y(r, 0) = normalize_peak(s.peak, np);
        m.y(r, 1) = normalize_width(s.width, np);
    }
    return m;
}

DesignMatrices normalize_dataset(const Dataset& data, const NormParams& np) {
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i] = i;
    }
    return normalize_dataset(data, all, np);
}

void GridSpec::validate() const {
    if (masses.empty() || grades.empty()) {
        throw ConfigError("grid: masses and grades must be non-empty");
    }
    for (const double m : masses) {
        if (!(m > 0.0)) {
            throw ConfigError("grid: masses must be positive");
        }
    }
    for (const int g : grades) {
        if (!is_known_grade(g)) {
            throw ConfigError("grid: grade must be 40, 60 or 80, got " + std::to_string(g));
        }
    }
    if (!(velocity_min >= kVelocityLow && velocity_max <= kVelocityHigh && velocity_min <= velocity_max)) {
        throw ConfigError(fmt::format("grid: velocity range [{}, {}] must lie within [900, 1700] m/s",
                                      velocity_min, velocity_max));
    }
    if (!(velocity_step > 0.0)) {
        throw ConfigError("grid: velocity step must be positive");
    }
    if (layer_count_min < kLayerCountLow || layer_count_max > kLayerCountHigh || layer_count_min > layer_count_max) {
        throw ConfigError("grid: layer counts must lie within [6, 10]");
    }
}

std::vector<double> GridSpec::velocities() const {
    std::vector<double> v;
    // Integer stepping avoids accumulating rounding in the grid values.
    const auto steps = static_cast<long>(std::floor((velocity_max - velocity_min) / velocity_step + 1e-9));
    for (long i = 0; i <= steps; ++i) {
        v.push_back(velocity_min + static_cast<double>(i) * velocity_step);
    }
    return v;
}

void GeneratorConfig::validate() const {
    const bool positive = peak_coefficient > 0.0 && velocity_exponent > 0.0 && width_coefficient > 0.0 &&
                          hardening >= 0.0 && first_thickness > 0.0 && other_thickness > 0.0 &&
                          noise_sigma_peak >= 0.0 && noise_sigma_width >= 0.0 && v_min > 0.0;
    if (!positive) {
        throw ConfigError("generator: coefficients, thicknesses and v_min must be positive; noise and hardening non-negative");
    }
}

std::vector<Condition> build_conditions(const GridSpec& grid) {
    grid.validate();
    const auto velocities = grid.velocities();
    const int cycle = grid.layer_count_max - grid.layer_count_min + 1;
    std::vector<Condition> out;
    std::size_t index = 0;
    for (const double mass : grid.masses) {
        for (const double v : velocities) {
            for (const int grade : grid.grades) {
                ++index;
                const int layers = grid.layer_count_min + static_cast<int>(index % static_cast<std::size_t>(cycle));
                out.push_back({mass, v, grade, layers});
            }
        }
    }
    return out;
}

std::vector<LayerResponse> surrogate_response(const Condition& c, const GeneratorConfig& g) {
    std::vector<LayerResponse> layers;
    layers.reserve(static_cast<std::size_t>(c.layer_count));
    const double material = std::pow(static_cast<double>(c.material_grade), kGradeExponent);
    const double mass = std::pow(c.warhead_mass, kMassExponent);
    double v = c.velocity;
    for (int k = 1; k <= c.layer_count; ++k) {
        const double thickness = k == 1 ? g.first_thickness : g.other_thickness;
        const double peak = g.peak_coefficient * material * std::pow(v, g.velocity_exponent) *
                            (1.0 + g.hardening * static_cast<double>(k - 1)) / mass;
        const double width = g.width_coefficient * 1000.0 * thickness / v;
        layers.push_back({peak, width, v});
        if (k == c.layer_count) {
            break;
        }
        const double v_sq = v * v - 2.0 * (kGravity * peak) * thickness;
        if (!(v_sq >= g.v_min * g.v_min)) {
            throw GenerationError(fmt::format("surrogate: projectile stops before layer {} of {} {}", k + 1,
                                              c.layer_count, describe(c)));
        }
        v = std::sqrt(v_sq);
    }
    return layers;
}

Dataset generate_dataset(const GridSpec& grid, const GeneratorConfig& g) {
    g.validate();
    const auto conditions = build_conditions(grid);
    Rng noise(g.seed);
    Dataset out;
    for (const Condition& c : conditions) {
        const auto layers = surrogate_response(c, g);
        for (std::size_t k = 0; k < layers.size(); ++k) {
            LayerSample s{c, static_cast<int>(k + 1), layers[k].peak, layers[k].width};
            if (g.noise_enabled) {
                s.peak *= std::exp(g.noise_sigma_peak * noise.normal());
                s.width *= std::exp(g.noise_sigma_width * noise.normal());
            }
            out.push_back(s);
        }
    }
    return out;
}

std::vector<std::size_t> FoldSplit::validation_indices(std::size_t fold) const { return folds.at(fold); }

std::vector<std::size_t> FoldSplit::train_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        if (f != fold) {
            out.insert(out.end(), folds[f].begin(), folds[f].end());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> FoldSplit::assignment(std::size_t n) const {
    std::vector<std::size_t> out(n, folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        for (const std::size_t i : folds[f]) {
            out.at(i) = f;
        }
    }
    return out;
}

std::uint32_t FoldSplit::checksum() const {
    std::string text;
    for (const auto& fold : folds) {
        for (const std::size_t i : fold) {
            text += std::to_string(i);
            text += ',';
        }
        text += ';';
    }
    return crc32_of(text);
}

FoldSplit kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2) {
        throw ConfigError("kfold_split: K must be at least 2, got " + std::to_string(k));
    }
    if (n < k) {
        throw ConfigError(fmt::format("kfold_split: {} samples cannot fill {} folds", n, k));
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    FoldSplit split;
    split.folds.resize(k);
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t begin = f * n / k;
        const std::size_t end = (f + 1) * n / k;
        split.folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                              order.begin() + static_cast<std::ptrdiff_t>(end));
        std::sort(split.folds[f].begin(), split.folds[f].end());
    }
    return split;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') {
        cells.emplace_back();
    }
    return cells;
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
        text.remove_prefix(1);
    }
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
        text.remove_suffix(1);
    }
    if (text.empty()) {
        return false;
    }
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    return ec == std::errc() && ptr == text.data() + text.size();
}

} // namespace

Dataset parse_dataset(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) {
        throw ParseError("dataset: empty file");
    }
    if (!header.empty() && header.back() == '\r') {
        header.pop_back();
    }
    if (header != kDatasetHeader) {
        throw ParseError(std::string("dataset: header must be '") + kDatasetHeader + "', got '" + header + "'");
    }
    Dataset out;
    std::vector<std::size_t> bad_rows;
    std::string problems;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto cells = split_csv_line(line);
        std::string issue;
        LayerSample s;
        if (cells.size() != 7) {
            issue = fmt::format("expected 7 columns, got {}", cells.size());
        } else if (!parse_number(cells[0], s.condition.warhead_mass) || !parse_number(cells[1], s.condition.velocity) ||
                   !parse_number(cells[2], s.condition.material_grade) ||
                   !parse_number(cells[3], s.condition.layer_count) || !parse_number(cells[4], s.layer_index) ||
                   !parse_number(cells[5], s.peak) || !parse_number(cells[6], s.width)) {
            issue = "non-numeric cell";
        } else {
            try {
                s.validate();
            } catch (const DomainError& e) {
                issue = e.what();
            }
        }
        if (!issue.empty()) {
            bad_rows.push_back(row);
            problems += fmt::format("\n  row {}: {}", row, issue);
        } else {
            out.push_back(s);
        }
    }
    if (!bad_rows.empty()) {
        throw ParseError(fmt::format("dataset: {} invalid row(s):{}", bad_rows.size(), problems), bad_rows);
    }
    if (out.empty()) {
        throw ParseError("dataset: no samples");
    }
    return out;
}

void format_dataset(const Dataset& d, std::ostream& out) {
    out << kDatasetHeader << '\n';
    for (const LayerSample& s : d) {
        // fmt's shortest round-trip representation keeps the file exact.
        out << fmt::format("{},{},{},{},{},{},{}\n", s.condition.warhead_mass, s.condition.velocity,
                           s.condition.material_grade, s.condition.layer_count, s.layer_index, s.peak, s.width);
    }
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    return parse_dataset(in);
}

void write_dataset(const Dataset& d, const std::filesystem::path& path) {
    std::ostringstream out;
    format_dataset(d, out);
    write_file_atomic(path, out.str());
}

} // namespace semlp
