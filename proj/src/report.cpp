#include "semlp/report.hpp"

#include <array>

#include <fmt/format.h>
#include <json.hpp>

#include "semlp/error.hpp"

namespace semlp {

namespace {

using Json = nlohmann::ordered_json;

std::array<double, 8> metric_values(const MetricReport& m) {
    return {m.peak.mape,  m.peak.rmse,  m.peak.r2,  m.peak.nrmse,
            m.width.mape, m.width.rmse, m.width.r2, m.width.nrmse};
}

void append_csv_values(std::string& out, const MetricReport& m) {
    for (const double v : metric_values(m)) {
        out += fmt::format(",{}", v);
    }
    out += '\n';
}

Json row_json(const ReportRow& row) {
    Json j;
    j["fold"] = row.label;
    const auto values = metric_values(row.metrics);
    for (std::size_t i = 0; i < values.size(); ++i) {
        j[metric_columns()[i]] = values[i];
    }
    return j;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

} // namespace

ReportFormat parse_report_format(std::string_view text) {
    if (text == "csv") {
        return ReportFormat::csv;
    }
    if (text == "json") {
        return ReportFormat::json;
    }
    throw ConfigError(fmt::format("unknown report format '{}' (expected csv or json)", text));
}

std::string_view report_extension(ReportFormat f) noexcept { return f == ReportFormat::csv ? "csv" : "json"; }

const std::vector<std::string>& metric_columns() {
    static const std::vector<std::string> columns = {
        "acceleration_peak_mape", "acceleration_peak_rmse", "acceleration_peak_r2", "acceleration_peak_nrmse",
        "pulse_width_mape",       "pulse_width_rmse",       "pulse_width_r2",       "pulse_width_nrmse"};
    return columns;
}

std::vector<ReportRow> cv_rows(const CrossValidationReport& cv) {
    std::vector<ReportRow> rows;
    for (const FoldReport& f : cv.folds) {
        rows.push_back({fmt::format("{}-fold", f.fold + 1), f.metrics});
    }
    rows.push_back({"average", cv.average});
    return rows;
}

std::string metric_table_csv(const std::vector<ReportRow>& rows) {
    std::string out = "fold";
    for (const auto& c : metric_columns()) {
        out += "," + c;
    }
    out += '\n';
    for (const ReportRow& row : rows) {
        out += row.label;
        append_csv_values(out, row.metrics);
    }
    return out;
}

std::string metric_table_json(const std::vector<ReportRow>& rows) {
    Json j;
    j["columns"] = metric_columns();
    j["rows"] = Json::array();
    for (const ReportRow& row : rows) {
        j["rows"].push_back(row_json(row));
    }
    return dump(j);
}

std::string metric_table(const std::vector<ReportRow>& rows, ReportFormat f) {
    return f == ReportFormat::csv ? metric_table_csv(rows) : metric_table_json(rows);
}

std::string format_checksum(std::uint32_t crc) { return fmt::format("{:08x}", crc); }

std::string cv_report(const CrossValidationReport& cv, ReportFormat f) {
    if (f == ReportFormat::csv) {
        return metric_table_csv(cv_rows(cv));
    }
    Json j;
    j["model_type"] = variant_label(cv.model_config.variant());
    j["fold_checksum"] = format_checksum(cv.fold_checksum);
    j["columns"] = metric_columns();
    j["rows"] = Json::array();
    for (const ReportRow& row : cv_rows(cv)) {
        j["rows"].push_back(row_json(row));
    }
    return dump(j);
}

std::string ablation_report(const AblationReport& ab, ReportFormat f) {
    if (f == ReportFormat::csv) {
        std::string out = "model_type,fold_checksum,fold";
        for (const auto& c : metric_columns()) {
            out += "," + c;
        }
        out += '\n';
        for (const CrossValidationReport& cv : ab.variants) {
            const std::string prefix =
                fmt::format("{},{}", variant_label(cv.model_config.variant()), format_checksum(cv.fold_checksum));
            for (const ReportRow& row : cv_rows(cv)) {
                out += prefix + "," + row.label;
                append_csv_values(out, row.metrics);
            }
        }
        return out;
    }
    Json j;
    j["fold_checksum"] = format_checksum(ab.fold_checksum);
    j["columns"] = metric_columns();
    j["variants"] = Json::array();
    for (const CrossValidationReport& cv : ab.variants) {
        Json block;
        block["model_type"] = variant_label(cv.model_config.variant());
        block["fold_checksum"] = format_checksum(cv.fold_checksum);
        block["rows"] = Json::array();
        for (const ReportRow& row : cv_rows(cv)) {
            block["rows"].push_back(row_json(row));
        }
        j["variants"].push_back(std::move(block));
    }
    return dump(j);
}

std::string gradcheck_report(const GradcheckReport& r, ReportFormat f) {
    if (f == ReportFormat::csv) {
        std::string out = "layer,worst_relative_error,worst_parameter,passed\n";
        for (const LayerCheck& l : r.layers) {
            out += fmt::format("{},{},\"{}\",{}\n", l.layer, l.worst_relative_error, l.worst_parameter,
                               l.passed ? "true" : "false");
        }
        return out;
    }
    Json j;
    j["seeds"] = r.seeds;
    j["worst_relative_error"] = r.worst_relative_error;
    j["passed"] = r.passed;
    j["layers"] = Json::array();
    for (const LayerCheck& l : r.layers) {
        j["layers"].push_back({{"layer", l.layer},
                               {"worst_relative_error", l.worst_relative_error},
                               {"worst_parameter", l.worst_parameter},
                               {"passed", l.passed}});
    }
    return dump(j);
}

} // namespace semlp
