#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "semlp/matrix.hpp"

namespace semlp {

inline constexpr std::size_t kInputFeatures = 5;
inline constexpr std::size_t kOutputTargets = 2;

// Feature order: mass, velocity, grade, layer_count, layer_index.
using FeatureVector = std::array<double, kInputFeatures>;

/// One working condition. Material grade is the concrete strength class number (C40 -> 40).
struct Condition {
    double warhead_mass = 0.0; // kg
    double velocity = 0.0;     // m/s
    int material_grade = 0;
    int layer_count = 0;

    /// Grid bounds: velocity in [900, 1700], grade 40/60/80, 6 to 10 layers.
    void validate() const;
    /// Physically meaningful only; conditions outside the grid pass and are flagged later
    /// as extrapolation.
    void validate_physical(int layer_index) const;
    friend bool operator==(const Condition&, const Condition&) = default;
};

struct LayerSample {
    Condition condition;
    int layer_index = 0; // 1-based
    double peak = 0.0;   // g
    double width = 0.0;  // ms

    void validate() const;
    friend bool operator==(const LayerSample&, const LayerSample&) = default;
};

using Dataset = std::vector<LayerSample>;

FeatureVector raw_features(const Condition& c, int layer_index);

/// Scale constants for the input min-max map and the two target maps.
struct NormParams {
    FeatureVector x_min{};
    FeatureVector x_max{};
    double log_max = 0.0;   // max ln(1 + peak) over the fitting set
    double width_max = 0.0; // max width over the fitting set

    /// Throws NormalizationError on a degenerate feature or non-positive target scale.
    void validate() const;

    static NormParams fit(const Dataset& data, std::span<const std::size_t> indices);
    static NormParams fit(const Dataset& data);

    friend bool operator==(const NormParams&, const NormParams&) = default;
};

/// Min-max map of the five inputs. Values outside the fitted range are returned as-is
/// (outside [0, 1]); `extrapolated` reports whether that happened.
FeatureVector normalize_features(const Condition& c, int layer_index, const NormParams& np,
                                 bool* extrapolated = nullptr);
double normalize_peak(double peak, const NormParams& np);
double normalize_width(double width, const NormParams& np);

struct PhysicalTargets {
    double peak = 0.0;  // g
    double width = 0.0; // ms
};

PhysicalTargets denormalize_outputs(double peak_normalized, double width_normalized, const NormParams& np);
/// Same, but refuses to guess a scale when no parameters are available.
PhysicalTargets denormalize_outputs(double peak_normalized, double width_normalized,
                                    const std::optional<NormParams>& np);

struct DesignMatrices {
    Matrix x; // n x 5, normalized inputs
    Matrix y; // n x 2, normalized (peak, width)
};

DesignMatrices normalize_dataset(const Dataset& data, std::span<const std::size_t> indices, const NormParams& np);
DesignMatrices normalize_dataset(const Dataset& data, const NormParams& np);

/// True when any normalized input lies outside [0, 1].
bool is_extrapolated(std::span<const double> normalized_features) noexcept;

// ---------------------------------------------------------------------------
// Synthetic corpus

/// Condition grid: cross product of masses x velocities x grades in that lexicographic
/// order, with the layer count cycling through [layer_count_min, layer_count_max] on
/// the 1-based condition index.
struct GridSpec {
    std::vector<double> masses{60.0, 150.0, 300.0, 600.0};
    double velocity_min = 900.0;
    double velocity_max = 1700.0;
    double velocity_step = 100.0;
    std::vector<int> grades{40, 60, 80};
    int layer_count_min = 6;
    int layer_count_max = 10;

    void validate() const;
    std::vector<double> velocities() const;
};

/// Closed-form stand-in for the penetration simulations. Not a physics model; it only
/// has to be a smooth, learnable nonlinear map over the grid:
///   peak_k  = C_p * grade^0.4 * v_k^e * (1 + hardening (k-1)) / mass^0.33     [g]
///   width_k = C_w * 1000 * t_k / v_k                                            [ms]
///   v_{k+1} = sqrt(v_k^2 - 2 (9.81 peak_k) t_k)
/// With e > 2 the fractional energy loss per layer falls as the projectile slows, so
/// deep layers never approach a stop and the 1/v width tail stays bounded.
struct GeneratorConfig {
    double peak_coefficient = 0.00729;
    double velocity_exponent = 2.25;
    double width_coefficient = 2.4;
    double hardening = 0.1;
    double first_thickness = 0.30; // m
    double other_thickness = 0.18; // m
    double noise_sigma_peak = 0.03;
    double noise_sigma_width = 0.02;
    bool noise_enabled = true;
    double v_min = 50.0; // m/s
    std::uint64_t seed = 0;

    void validate() const;
};

struct LayerResponse {
    double peak = 0.0;
    double width = 0.0;
    double entry_velocity = 0.0;
};

std::vector<Condition> build_conditions(const GridSpec& grid);

/// Noise-free per-layer response; throws GenerationError naming the condition when the
/// projectile would drop below v_min before its last layer.
std::vector<LayerResponse> surrogate_response(const Condition& c, const GeneratorConfig& g);

Dataset generate_dataset(const GridSpec& grid, const GeneratorConfig& g);

// ---------------------------------------------------------------------------
// K-fold

struct FoldSplit {
    std::vector<std::vector<std::size_t>> folds;

    std::size_t k() const noexcept { return folds.size(); }
    std::vector<std::size_t> validation_indices(std::size_t fold) const;
    std::vector<std::size_t> train_indices(std::size_t fold) const;
    /// Sample-to-fold assignment, used to show that runs share identical folds.
    std::vector<std::size_t> assignment(std::size_t n) const;
    std::uint32_t checksum() const;
};

/// Seeded shuffle then K contiguous chunks whose sizes differ by at most one.
FoldSplit kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kDatasetHeader = "mass_kg,velocity_mps,grade,layer_count,layer_index,peak_g,width_ms";

Dataset parse_dataset(std::istream& in);
void format_dataset(const Dataset& d, std::ostream& out);
Dataset read_dataset(const std::filesystem::path& path);
void write_dataset(const Dataset& d, const std::filesystem::path& path);

} // namespace semlp
