#include "semlp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "semlp/error.hpp"

namespace semlp {

namespace {
void require_pairs(std::span<const double> pred, std::span<const double> truth, const char* name) {
    if (pred.size() != truth.size()) {
        throw DimensionError(std::string(name) + ": " + std::to_string(pred.size()) + " predictions vs " +
                             std::to_string(truth.size()) + " true values");
    }
    if (truth.empty()) {
        throw DomainError(std::string(name) + ": empty input");
    }
}

double sum_squared_error(std::span<const double> pred, std::span<const double> truth) {
    double sse = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = pred[i] - truth[i];
        sse += d * d;
    }
    return sse;
}
} // namespace

double mape(std::span<const double> pred, std::span<const double> truth) {
    require_pairs(pred, truth, "mape");
    double acc = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == 0.0) {
            throw DomainError("mape: true value at index " + std::to_string(i) + " is zero");
        }
        acc += std::abs((pred[i] - truth[i]) / truth[i]);
    }
    return acc / static_cast<double>(truth.size()) * 100.0;
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
    require_pairs(pred, truth, "rmse");
    return std::sqrt(sum_squared_error(pred, truth) / static_cast<double>(truth.size()));
}

double r2(std::span<const double> pred, std::span<const double> truth) {
    require_pairs(pred, truth, "r2");
    if (truth.size() < 2) {
        throw DomainError("r2: needs at least two samples");
    }
    double mean = 0.0;
    for (const double y : truth) {
        mean += y;
    }
    mean /= static_cast<double>(truth.size());
    double sst = 0.0;
    for (const double y : truth) {
        sst += (y - mean) * (y - mean);
    }
    if (!(sst > 0.0)) {
        throw DomainError("r2: true values have zero variance");
    }
    return 1.0 - sum_squared_error(pred, truth) / sst;
}

double nrmse(std::span<const double> pred, std::span<const double> truth) {
    require_pairs(pred, truth, "nrmse");
    const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) {
        throw DomainError("nrmse: true values have zero range");
    }
    return rmse(pred, truth) / range;
}

TargetMetrics evaluate_target(std::span<const double> pred, std::span<const double> truth) {
    TargetMetrics m;
    m.mape = mape(pred, truth);
    m.rmse = rmse(pred, truth);
    m.r2 = r2(pred, truth);
    m.nrmse = nrmse(pred, truth);
    m.n = truth.size();
    const auto [lo, hi] = std::minmax_element(truth.begin(), truth.end());
    m.y_min = *lo;
    m.y_max = *hi;
    return m;
}

MetricReport fold_aggregate(std::span<const MetricReport> reports) {
    if (reports.empty()) {
        throw DomainError("fold_aggregate: no reports");
    }
    const auto n = static_cast<double>(reports.size());
    const auto average = [&](auto member) {
        TargetMetrics out;
        std::size_t samples = 0;
        out.y_min = (reports.front().*member).y_min;
        out.y_max = (reports.front().*member).y_max;
        for (const MetricReport& r : reports) {
            const TargetMetrics& t = r.*member;
            out.mape += t.mape;
            out.rmse += t.rmse;
            out.r2 += t.r2;
            out.nrmse += t.nrmse;
            samples += t.n;
            out.y_min = std::min(out.y_min, t.y_min);
            out.y_max = std::max(out.y_max, t.y_max);
        }
        out.mape /= n;
        out.rmse /= n;
        out.r2 /= n;
        out.nrmse /= n;
        out.n = (samples + reports.size() / 2) / reports.size(); // mean fold size
        return out;
    };
    return {average(&MetricReport::peak), average(&MetricReport::width)};
}

} // namespace semlp
