#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "f3m/kernel.hpp"
#include "f3m/points.hpp"

namespace f3m {

/// Largest n_x * n_y the dense oracle accepts unless told otherwise.
inline constexpr std::size_t kDefaultOracleCap = std::size_t{1} << 36;

/// Exact v = k(X, Y) b in 64-bit arithmetic, streamed row by row. Throws
/// OracleTooLarge when n_x * n_y exceeds `cap`.
[[nodiscard]] std::vector<double> dense_matvec(const KernelSpec& kernel, const Points& x, const Points& y,
                                               std::span<const double> b, std::size_t cap = kDefaultOracleCap,
                                               int threads = 0);

struct ErrorReport {
    double relative_error = 0.0;  // squared norm ratio
    std::size_t subset = 0;
    double approx_seconds = 0.0;
    double exact_seconds = 0.0;
};

/// ||v_hat' - v'||^2 / ||v'||^2 where ' keeps the first m rows.
/// Throws UndefinedMetric when ||v'|| = 0.
[[nodiscard]] double relative_error(std::span<const double> approx, std::span<const double> exact);

/// Compares v_hat against the exact product on the first m rows of X.
[[nodiscard]] ErrorReport subset_error(const KernelSpec& kernel, const Points& x, const Points& y,
                                       std::span<const double> b, std::span<const double> v_hat,
                                       std::size_t m = 5000, int threads = 0);

/// Least-squares slope of log10(seconds) against log10(n).
[[nodiscard]] double scaling_slope(std::span<const std::pair<double, double>> times);

}  // namespace f3m
