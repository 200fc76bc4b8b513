#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace semlp {

// Regression metrics on physical (denormalized) values.
double mape(std::span<const double> pred, std::span<const double> truth); // percent
double rmse(std::span<const double> pred, std::span<const double> truth);
double r2(std::span<const double> pred, std::span<const double> truth);
/// RMSE over the range of the true values.
double nrmse(std::span<const double> pred, std::span<const double> truth);

struct TargetMetrics {
    double mape = 0.0;
    double rmse = 0.0;
    double r2 = 0.0;
    double nrmse = 0.0;
    std::size_t n = 0;
    double y_min = 0.0;
    double y_max = 0.0;

    friend bool operator==(const TargetMetrics&, const TargetMetrics&) = default;
};

struct MetricReport {
    TargetMetrics peak;  // g
    TargetMetrics width; // ms

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

TargetMetrics evaluate_target(std::span<const double> pred, std::span<const double> truth);

/// Plain mean over folds of every metric; each fold counts once regardless of its size.
MetricReport fold_aggregate(std::span<const MetricReport> reports);

} // namespace semlp
