#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "f3m/engine.hpp"
#include "f3m/kernel.hpp"
#include "f3m/points.hpp"

namespace f3m {

struct KrrConfig {
    /// Ridge parameter; 0 selects 1e-3 * n.
    double lambda = 0.0;
    double tolerance = 1e-6;
    std::size_t max_iterations = 1000;
    KernelSpec kernel;
    F3MConfig f3m;

    void validate() const;
    [[nodiscard]] double resolved_lambda(std::size_t n) const;
};

struct CgResult {
    std::vector<double> alpha;  // best iterate seen
    std::size_t iterations = 0;
    double residual = 0.0;  // relative residual of alpha
    bool converged = false;
    std::vector<double> residual_history;  // relative residual after each iteration, starting at 1
    std::vector<double> best_history;      // running minimum of residual_history
    double seconds = 0.0;
};

/// y += K u for the kernel part of the system; the solver adds lambda u itself.
using KernelOperator = std::function<void(std::span<const double>, std::span<double>)>;

/// Conjugate gradient on (K + lambda I) alpha = b. Non-convergence is reported
/// through the flag; a NaN residual throws SolverBreakdown.
[[nodiscard]] CgResult cg_solve(const KernelOperator& kernel, std::span<const double> b, double lambda,
                                double tolerance, std::size_t max_iterations);

/// CG with K replaced by the approximate F3M operator on X.
[[nodiscard]] CgResult cg_solve(const Points& x, std::span<const double> b, const KrrConfig& cfg);

/// CG with the exact dense product; the reference for timing and accuracy comparisons.
[[nodiscard]] CgResult cg_solve_dense(const Points& x, std::span<const double> b, const KrrConfig& cfg);

/// k(X_test, X_train) alpha through one F3M product.
[[nodiscard]] std::vector<double> predict(const Points& x_train, std::span<const double> alpha, const Points& x_test,
                                          const KrrConfig& cfg);

/// 1 - SS_res / SS_tot. Throws UndefinedMetric when the targets are constant.
[[nodiscard]] double r_squared(std::span<const double> truth, std::span<const double> prediction);

/// Area under the ROC curve for +-1 labels (ties count one half).
/// Throws UndefinedMetric unless both classes are present.
[[nodiscard]] double auc(std::span<const double> labels, std::span<const double> scores);

/// Median pairwise distance over a seeded subsample of at most `subsample` rows.
[[nodiscard]] double median_heuristic(const Points& x, std::size_t subsample, std::uint64_t seed);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded random split with round(test_fraction * n) test rows (at least one of each when n >= 2).
[[nodiscard]] Split train_test_split(std::size_t n, double test_fraction, std::uint64_t seed);

struct PlantedSignal {
    std::vector<std::size_t> subset;
    std::vector<double> alpha_star;
    std::vector<double> clean;  // k(X, D) alpha_star
    std::vector<double> y;      // clean + noise
};

/// Targets y = k(X, D) alpha* + eps with D a random subset of `subset_size` rows,
/// alpha* ~ N(0, I) and eps ~ N(0, noise_variance).
[[nodiscard]] PlantedSignal planted_signal(const Points& x, const KernelSpec& kernel, std::size_t subset_size,
                                           double noise_variance, std::uint64_t seed);

}  // namespace f3m
