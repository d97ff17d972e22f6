#include "f3m/points.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "f3m/error.hpp"

namespace f3m {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid input";
        case ErrorKind::InvalidSpec: return "invalid spec";
        case ErrorKind::InvalidDegree: return "invalid degree";
        case ErrorKind::InvalidState: return "invalid state";
        case ErrorKind::GridTooLarge: return "grid too large";
        case ErrorKind::OutOfCube: return "out of cube";
        case ErrorKind::DegenerateBox: return "degenerate box";
        case ErrorKind::OracleTooLarge: return "oracle too large";
        case ErrorKind::UndefinedMetric: return "undefined metric";
        case ErrorKind::SolverBreakdown: return "solver breakdown";
        case ErrorKind::Resource: return "resource error";
        case ErrorKind::Io: return "i/o error";
        case ErrorKind::InternalConsistency: return "internal consistency";
    }
    return "error";
}

Points::Points(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

Points::Points(std::size_t rows, std::size_t dim, std::vector<double> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
    if (data_.size() != rows_ * dim_) {
        fail(ErrorKind::InvalidInput, "point payload has " + std::to_string(data_.size()) +
                                          " values, expected " + std::to_string(rows_ * dim_));
    }
}

Points Points::head(std::size_t m) const {
    if (m > rows_) m = rows_;
    return Points(m, dim_, std::vector<double>(data_.begin(), data_.begin() + static_cast<std::ptrdiff_t>(m * dim_)));
}

Points Points::select(std::span<const std::size_t> rows) const {
    Points out(rows.size(), dim_);
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] >= rows_) fail(ErrorKind::InvalidInput, "row index out of range");
        auto src = row(rows[k]);
        auto dst = out.row(k);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return out;
}

void require_finite(const Points& points, const char* what) {
    require_finite(points.data(), what);
}

void require_finite(std::span<const double> values, const char* what) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            fail(ErrorKind::InvalidInput,
                 std::string(what) + " contains a non-finite value at flat index " + std::to_string(i));
        }
    }
}

}  // namespace f3m
