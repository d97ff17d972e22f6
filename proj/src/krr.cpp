#include "f3m/krr.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "f3m/datasets.hpp"
#include "f3m/error.hpp"
#include "f3m/oracle.hpp"

namespace f3m {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

}  // namespace

void KrrConfig::validate() const {
    if (lambda < 0.0 || !std::isfinite(lambda)) fail(ErrorKind::InvalidSpec, "ridge parameter must be positive");
    if (!(tolerance > 0.0)) fail(ErrorKind::InvalidSpec, "CG tolerance must be positive");
    if (max_iterations < 1) fail(ErrorKind::InvalidSpec, "CG needs at least one iteration");
    kernel.validate();
    f3m.validate();
}

double KrrConfig::resolved_lambda(std::size_t n) const { return lambda > 0.0 ? lambda : 1e-3 * static_cast<double>(n); }

CgResult cg_solve(const KernelOperator& kernel, std::span<const double> b, double lambda, double tolerance,
                  std::size_t max_iterations) {
    const auto start = std::chrono::steady_clock::now();
    if (!(lambda > 0.0)) fail(ErrorKind::InvalidSpec, "ridge parameter must be positive");
    require_finite(b, "right-hand side");
    const std::size_t n = b.size();
    CgResult result;
    result.alpha.assign(n, 0.0);
    result.residual_history.push_back(1.0);
    result.best_history.push_back(1.0);
    result.residual = 1.0;

    const double b_norm = std::sqrt(dot(b, b));
    if (b_norm == 0.0) {
        result.residual = 0.0;
        result.converged = true;
        result.residual_history.back() = 0.0;
        result.best_history.back() = 0.0;
        return result;
    }

    std::vector<double> x(n, 0.0);
    std::vector<double> r(b.begin(), b.end());
    std::vector<double> p = r;
    std::vector<double> ap(n);
    double rr = dot(r, r);
    for (std::size_t it = 1; it <= max_iterations; ++it) {
        std::fill(ap.begin(), ap.end(), 0.0);
        kernel(p, ap);
        for (std::size_t i = 0; i < n; ++i) ap[i] += lambda * p[i];
        const double pap = dot(p, ap);
        const double step = rr / pap;
        if (!std::isfinite(step)) {
            fail(ErrorKind::SolverBreakdown, "CG step is not finite at iteration " + std::to_string(it));
        }
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        const double rr_next = dot(r, r);
        const double rel = std::sqrt(rr_next) / b_norm;
        if (!std::isfinite(rel)) {
            fail(ErrorKind::SolverBreakdown, "CG residual is NaN at iteration " + std::to_string(it));
        }
        result.iterations = it;
        result.residual_history.push_back(rel);
        if (rel < result.residual) {
            result.residual = rel;
            result.alpha = x;
        }
        result.best_history.push_back(result.residual);
        if (rel <= tolerance) {
            result.converged = true;
            break;
        }
        const double beta = rr_next / rr;
        for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
        rr = rr_next;
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

CgResult cg_solve(const Points& x, std::span<const double> b, const KrrConfig& cfg) {
    cfg.validate();
    if (b.size() != x.size()) fail(ErrorKind::InvalidInput, "targets and points differ in length");
    const auto start = std::chrono::steady_clock::now();
    const F3MOperator op(x, x, cfg.kernel, cfg.f3m);
    CgResult result = cg_solve([&op](std::span<const double> u, std::span<double> out) { op.apply(u, out); }, b,
                               cfg.resolved_lambda(x.size()), cfg.tolerance, cfg.max_iterations);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

CgResult cg_solve_dense(const Points& x, std::span<const double> b, const KrrConfig& cfg) {
    cfg.validate();
    if (b.size() != x.size()) fail(ErrorKind::InvalidInput, "targets and points differ in length");
    const int threads = cfg.f3m.threads;
    return cg_solve(
        [&](std::span<const double> u, std::span<double> out) {
            const std::vector<double> v = dense_matvec(cfg.kernel, x, x, u, kDefaultOracleCap, threads);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
        },
        b, cfg.resolved_lambda(x.size()), cfg.tolerance, cfg.max_iterations);
}

std::vector<double> predict(const Points& x_train, std::span<const double> alpha, const Points& x_test,
                            const KrrConfig& cfg) {
    if (x_train.dim() != x_test.dim()) fail(ErrorKind::InvalidInput, "train and test dimensions differ");
    if (alpha.size() != x_train.size()) fail(ErrorKind::InvalidInput, "coefficient vector length mismatch");
    return f3m_matvec(x_test, x_train, alpha, cfg.kernel, cfg.f3m).v;
}

double r_squared(std::span<const double> truth, std::span<const double> prediction) {
    if (truth.size() != prediction.size() || truth.empty()) fail(ErrorKind::InvalidInput, "R^2 needs equal lengths");
    const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_res += (truth[i] - prediction[i]) * (truth[i] - prediction[i]);
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
    }
    if (ss_tot == 0.0) fail(ErrorKind::UndefinedMetric, "R^2 is undefined for constant targets");
    return 1.0 - ss_res / ss_tot;
}

double auc(std::span<const double> labels, std::span<const double> scores) {
    if (labels.size() != scores.size()) fail(ErrorKind::InvalidInput, "AUC needs equal lengths");
    std::vector<std::size_t> order(labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Mann-Whitney U from midranks of the positive class.
    double rank_sum = 0.0;
    std::size_t positives = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] > 0.0) {
                rank_sum += midrank;
                ++positives;
            }
        }
        i = j;
    }
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0) fail(ErrorKind::UndefinedMetric, "AUC needs both classes");
    const double pos = static_cast<double>(positives);
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * static_cast<double>(negatives));
}

double median_heuristic(const Points& x, std::size_t subsample, std::uint64_t seed) {
    if (x.size() < 2) fail(ErrorKind::InvalidInput, "median heuristic needs at least two points");
    std::vector<std::size_t> rows(x.size());
    std::iota(rows.begin(), rows.end(), 0);
    if (subsample >= 2 && subsample < x.size()) {
        auto rng = make_rng(seed, Stream::Subset, 1);
        std::shuffle(rows.begin(), rows.end(), rng);
        rows.resize(subsample);
    }
    std::vector<double> dist;
    dist.reserve(rows.size() * (rows.size() - 1) / 2);
    for (std::size_t a = 0; a < rows.size(); ++a) {
        for (std::size_t b = a + 1; b < rows.size(); ++b) {
            double r2 = 0.0;
            for (std::size_t d = 0; d < x.dim(); ++d) {
                const double diff = x(rows[a], d) - x(rows[b], d);
                r2 += diff * diff;
            }
            dist.push_back(std::sqrt(r2));
        }
    }
    const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
    std::nth_element(dist.begin(), mid, dist.end());
    if (!(*mid > 0.0)) fail(ErrorKind::InvalidInput, "median pairwise distance is zero");
    return *mid;
}

Split train_test_split(std::size_t n, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) fail(ErrorKind::InvalidInput, "test fraction must be in [0, 1)");
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    auto rng = make_rng(seed, Stream::Split);
    std::shuffle(rows.begin(), rows.end(), rng);
    std::size_t test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    if (n >= 2 && test_fraction > 0.0) test = std::clamp<std::size_t>(test, 1, n - 1);
    Split split;
    split.test.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(test));
    split.train.assign(rows.begin() + static_cast<std::ptrdiff_t>(test), rows.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

PlantedSignal planted_signal(const Points& x, const KernelSpec& kernel, std::size_t subset_size,
                             double noise_variance, std::uint64_t seed) {
    if (x.empty()) fail(ErrorKind::InvalidInput, "planted signal needs points");
    if (noise_variance < 0.0) fail(ErrorKind::InvalidInput, "noise variance must be non-negative");
    subset_size = std::min(subset_size, x.size());
    PlantedSignal out;
    std::vector<std::size_t> rows(x.size());
    std::iota(rows.begin(), rows.end(), 0);
    auto rng = make_rng(seed, Stream::Subset);
    std::shuffle(rows.begin(), rows.end(), rng);
    out.subset.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(subset_size));
    std::sort(out.subset.begin(), out.subset.end());
    out.alpha_star = normal_vector(subset_size, seed, Stream::Signal);
    out.clean = dense_matvec(kernel, x, x.select(out.subset), out.alpha_star);
    const std::vector<double> noise = normal_vector(x.size(), seed, Stream::Noise);
    const double sd = std::sqrt(noise_variance);
    out.y.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out.y[i] = out.clean[i] + sd * noise[i];
    return out;
}

}  // namespace f3m
