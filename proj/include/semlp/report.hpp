#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "semlp/gradcheck.hpp"
#include "semlp/metrics.hpp"
#include "semlp/training.hpp"

namespace semlp {

enum class ReportFormat { csv, json };

ReportFormat parse_report_format(std::string_view text);
std::string_view report_extension(ReportFormat f) noexcept;

/// The eight metric columns, peak first.
const std::vector<std::string>& metric_columns();

struct ReportRow {
    std::string label; // "1-fold" .. "K-fold", "average", or a free label
    MetricReport metrics;
};

/// Rows of a cross-validation report: one per fold, then "average".
std::vector<ReportRow> cv_rows(const CrossValidationReport& cv);

/// Header "fold,<metrics>" followed by one line per row. Numbers use shortest round-trip form.
std::string metric_table_csv(const std::vector<ReportRow>& rows);
/// {"columns": [...], "rows": [{"fold": label, <metric>: value, ...}]}
std::string metric_table_json(const std::vector<ReportRow>& rows);
std::string metric_table(const std::vector<ReportRow>& rows, ReportFormat f);

std::string cv_report(const CrossValidationReport& cv, ReportFormat f);

/// One block per variant with a model_type column, fold rows then the average row.
std::string ablation_report(const AblationReport& ab, ReportFormat f);

std::string gradcheck_report(const GradcheckReport& r, ReportFormat f);

std::string format_checksum(std::uint32_t crc);

} // namespace semlp
