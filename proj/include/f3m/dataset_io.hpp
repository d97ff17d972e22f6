#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "f3m/kernel.hpp"
#include "f3m/points.hpp"

namespace f3m {

/// F3M1 layout: "F3M1", u64 LE n, u32 LE D, u8 precision (0 = f64, 1 = f32),
/// three zero bytes, then the row-major payload.
inline constexpr std::size_t kF3m1HeaderBytes = 20;

void write_f3m(const std::string& path, const Points& points, Precision precision = Precision::F64);
[[nodiscard]] Points read_f3m(const std::string& path);

/// Vectors are stored as n x 1 files.
void write_vector(const std::string& path, std::span<const double> values, Precision precision = Precision::F64);
[[nodiscard]] std::vector<double> read_vector(const std::string& path);

struct CsvOptions {
    std::vector<std::size_t> columns;  // zero-based; empty keeps every column
    char delimiter = ',';
    std::size_t max_malformed = 10;
};

struct CsvReport {
    std::size_t rows = 0;
    std::size_t dim = 0;
    bool header_skipped = false;
    std::size_t rejected_nonfinite = 0;
    std::vector<std::size_t> malformed_lines;  // 1-based
};

/// Reads numeric CSV rows. A non-numeric first line is treated as a header;
/// rows with NaN or Inf are dropped and counted; more than max_malformed rows
/// that fail to parse abort with their line numbers.
[[nodiscard]] Points ingest_csv(const std::string& path, const CsvOptions& options, CsvReport* report = nullptr);

/// Writes rows with round-trip precision and no header.
void export_csv(const std::string& path, const Points& points, char delimiter = ',');

}  // namespace f3m
