#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "f3m/points.hpp"

namespace f3m::testing {

inline Points random_points(std::size_t n, std::size_t dim, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Points p(n, dim);
    for (double& v : p.data()) v = u(rng);
    return p;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<double> v(n);
    for (double& x : v) x = g(rng);
    return v;
}

/// Brute-force Gaussian product in long double, written independently of the library.
inline std::vector<double> reference_product(const Points& x, const Points& y, std::span<const double> b,
                                             double gamma) {
    std::vector<double> out(x.size());
    const long double scale = 1.0L / (2.0L * gamma * gamma);
    for (std::size_t i = 0; i < x.size(); ++i) {
        long double acc = 0.0L;
        for (std::size_t j = 0; j < y.size(); ++j) {
            long double r2 = 0.0L;
            for (std::size_t d = 0; d < x.dim(); ++d) {
                const long double diff = static_cast<long double>(x(i, d)) - y(j, d);
                r2 += diff * diff;
            }
            acc += std::exp(-r2 * scale) * b[j];
        }
        out[i] = static_cast<double>(acc);
    }
    return out;
}

inline double rel_l2(std::span<const double> approx, std::span<const double> exact) {
    long double num = 0.0L;
    long double den = 0.0L;
    for (std::size_t i = 0; i < exact.size(); ++i) {
        const long double d = static_cast<long double>(approx[i]) - exact[i];
        num += d * d;
        den += static_cast<long double>(exact[i]) * exact[i];
    }
    return static_cast<double>(std::sqrt(num / den));
}

}  // namespace f3m::testing
