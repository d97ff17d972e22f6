#include "f3m/oracle.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <string>

#include <omp.h>

#include "f3m/error.hpp"

namespace f3m {

std::vector<double> dense_matvec(const KernelSpec& spec, const Points& x, const Points& y, std::span<const double> b,
                                 std::size_t cap, int threads) {
    const Kernel kernel(spec);
    if (x.dim() != y.dim()) fail(ErrorKind::InvalidInput, "X and Y dimensions differ");
    if (b.size() != y.size()) fail(ErrorKind::InvalidInput, "weight vector length does not match Y");
    if (y.size() != 0 && x.size() > cap / y.size()) {
        fail(ErrorKind::OracleTooLarge, std::to_string(x.size()) + " x " + std::to_string(y.size()) +
                                            " exceeds the oracle cap of " + std::to_string(cap) + " entries");
    }
    const std::size_t dim = x.dim();
    const std::size_t nx = x.size();
    std::vector<double> v(nx, 0.0);
    const int nthreads = threads > 0 ? threads : omp_get_max_threads();
    constexpr std::size_t kRowBlock = 64;
    const std::size_t blocks = (nx + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
    for (std::size_t blk = 0; blk < blocks; ++blk) {
        const std::size_t first = blk * kRowBlock;
        const std::size_t count = std::min(kRowBlock, nx - first);
        near_field_accumulate(kernel, x.data().subspan(first * dim, count * dim), y.data(), dim, b,
                              {v.data() + first, count}, Precision::F64);
    }
    return v;
}

double relative_error(std::span<const double> approx, std::span<const double> exact) {
    if (approx.size() != exact.size()) fail(ErrorKind::InvalidInput, "compared vectors differ in length");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        const double diff = approx[i] - exact[i];
        num += diff * diff;
        den += exact[i] * exact[i];
    }
    if (den == 0.0) fail(ErrorKind::UndefinedMetric, "reference vector has zero norm");
    return num / den;
}

ErrorReport subset_error(const KernelSpec& kernel, const Points& x, const Points& y, std::span<const double> b,
                         std::span<const double> v_hat, std::size_t m, int threads) {
    if (v_hat.size() != x.size()) fail(ErrorKind::InvalidInput, "approximate product has the wrong length");
    if (m == 0 || m > x.size()) m = x.size();
    const auto start = std::chrono::steady_clock::now();
    const std::vector<double> exact = dense_matvec(kernel, x.head(m), y, b, kDefaultOracleCap, threads);
    ErrorReport report;
    report.exact_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.subset = m;
    report.relative_error = relative_error(v_hat.first(m), exact);
    return report;
}

double scaling_slope(std::span<const std::pair<double, double>> times) {
    if (times.size() < 3) fail(ErrorKind::InvalidInput, "slope needs at least three measurements");
    std::set<double> distinct;
    double mx = 0.0;
    double my = 0.0;
    for (const auto& [n, seconds] : times) {
        if (!(n > 0.0) || !(seconds > 0.0)) fail(ErrorKind::InvalidInput, "sizes and times must be positive");
        distinct.insert(n);
        mx += std::log10(n);
        my += std::log10(seconds);
    }
    if (distinct.size() < 2) fail(ErrorKind::InvalidInput, "slope needs distinct problem sizes");
    const double count = static_cast<double>(times.size());
    mx /= count;
    my /= count;
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& [n, seconds] : times) {
        const double dx = std::log10(n) - mx;
        sxy += dx * (std::log10(seconds) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

}  // namespace f3m
