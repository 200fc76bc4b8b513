#include "semlp/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "semlp/error.hpp"

namespace semlp {

const char* to_string(LoadFailure failure) noexcept {
    switch (failure) {
    case LoadFailure::io: return "io error";
    case LoadFailure::bad_magic: return "bad magic";
    case LoadFailure::version_mismatch: return "version mismatch";
    case LoadFailure::truncated: return "truncated stream";
    case LoadFailure::checksum: return "checksum failure";
    case LoadFailure::malformed: return "malformed content";
    case LoadFailure::invariant: return "invariant violation";
    case LoadFailure::pairing: return "pairing error";
    }
    return "unknown";
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw DimensionError("Matrix::from_rows: ragged rows");
        }
        std::copy(row.begin(), row.end(), m.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
        ++i;
    }
    return m;
}

Matrix Matrix::from_data(std::size_t rows, std::size_t cols, std::vector<double> data) {
    if (data.size() != rows * cols) {
        throw DimensionError("Matrix::from_data: " + std::to_string(data.size()) +
                             " values for shape " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
    Matrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.data_ = std::move(data);
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

void Matrix::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

bool Matrix::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* context) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(context) + ": shape mismatch " + a.shape_string() +
                             " vs " + b.shape_string());
    }
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = m.row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

} // namespace semlp
