#include "f3m/datasets.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>

#include <fftw3.h>

#include "f3m/error.hpp"

namespace f3m {

namespace {

// Exact Toeplitz factorisation is used up to this length, spectral synthesis above.
constexpr std::size_t kHoskingLimit = std::size_t{1} << 14;

double fgn_autocovariance(std::size_t k, double hurst) {
    const double h2 = 2.0 * hurst;
    const double kd = static_cast<double>(k);
    return 0.5 * (std::pow(kd + 1.0, h2) - 2.0 * std::pow(kd, h2) + std::pow(std::abs(kd - 1.0), h2));
}

// Durbin-Levinson recursion on the fractional Gaussian noise covariance.
std::vector<double> fgn_hosking(std::size_t n, double hurst, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> cov(n);
    for (std::size_t k = 0; k < n; ++k) cov[k] = fgn_autocovariance(k, hurst);
    std::vector<double> out(n);
    std::vector<double> phi(n, 0.0);
    std::vector<double> prev(n, 0.0);
    double v = cov[0];
    out[0] = std::sqrt(v) * normal(rng);
    for (std::size_t i = 1; i < n; ++i) {
        double acc = cov[i];
        for (std::size_t j = 1; j < i; ++j) acc -= prev[j] * cov[i - j];
        const double phii = acc / v;
        phi[i] = phii;
        for (std::size_t j = 1; j < i; ++j) phi[j] = prev[j] - phii * prev[i - j];
        v *= (1.0 - phii * phii);
        double mean = 0.0;
        for (std::size_t j = 1; j <= i; ++j) mean += phi[j] * out[i - j];
        out[i] = mean + std::sqrt(std::max(v, 0.0)) * normal(rng);
        std::copy(phi.begin(), phi.begin() + static_cast<std::ptrdiff_t>(i) + 1, prev.begin());
    }
    return out;
}

// Circulant embedding of the covariance; negative eigenvalues (rounding only) are clamped.
std::vector<double> fgn_circulant(std::size_t n, double hurst, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t half = std::bit_ceil(n);
    const std::size_t m = 2 * half;
    auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * m));
    if (buf == nullptr) fail(ErrorKind::Resource, "cannot allocate the fBm embedding buffer");
    const fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(m), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);

    for (std::size_t k = 0; k <= half; ++k) {
        buf[k][0] = fgn_autocovariance(k, hurst);
        buf[k][1] = 0.0;
    }
    for (std::size_t k = 1; k < half; ++k) {
        buf[m - k][0] = buf[k][0];
        buf[m - k][1] = 0.0;
    }
    fftw_execute(plan);
    std::vector<double> eig(m);
    for (std::size_t k = 0; k < m; ++k) eig[k] = std::max(buf[k][0], 0.0);

    const double md = static_cast<double>(m);
    buf[0][0] = std::sqrt(eig[0] / md) * normal(rng);
    buf[0][1] = 0.0;
    buf[half][0] = std::sqrt(eig[half] / md) * normal(rng);
    buf[half][1] = 0.0;
    for (std::size_t k = 1; k < half; ++k) {
        const double scale = std::sqrt(eig[k] / (2.0 * md));
        const double re = scale * normal(rng);
        const double im = scale * normal(rng);
        buf[k][0] = re;
        buf[k][1] = im;
        buf[m - k][0] = re;
        buf[m - k][1] = -im;
    }
    fftw_execute(plan);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = buf[k][0];
    fftw_destroy_plan(plan);
    fftw_free(buf);
    return out;
}

void fill_uniform(Points& pts, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (double& value : pts.data()) value = uniform(rng);
}

void fill_normal(Points& pts, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& value : pts.data()) value = normal(rng);
}

Points clustered(const DatasetSpec& spec, std::mt19937_64& rng) {
    // Center levels until the last one holds at most n / clusters centers.
    std::size_t levels = 1;
    std::size_t centers = spec.clusters_per_level;
    while (centers * spec.clusters_per_level <= spec.n / spec.clusters_per_level && levels < 12) {
        centers *= spec.clusters_per_level;
        ++levels;
    }
    const ClusterHierarchy tree = cluster_hierarchy(spec.dim, levels, spec.clusters_per_level, spec.cluster_decay, rng);
    const Points& parents = tree.levels.back();
    const double spread = tree.spread.back() * spec.cluster_decay;
    std::normal_distribution<double> normal(0.0, spread);
    Points out(spec.n, spec.dim);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const auto parent = parents.row(i % parents.size());
        for (std::size_t d = 0; d < spec.dim; ++d) out(i, d) = parent[d] + normal(rng);
    }
    return out;
}

Points paths(const DatasetSpec& spec, double hurst, std::mt19937_64& rng) {
    Points out(spec.n, spec.dim);
    for (std::size_t d = 0; d < spec.dim; ++d) {
        const std::vector<double> path = fbm_path(spec.n, hurst, rng);
        for (std::size_t i = 0; i < spec.n; ++i) out(i, d) = path[i];
    }
    return out;
}

}  // namespace

const char* to_string(DatasetKind kind) noexcept {
    switch (kind) {
        case DatasetKind::Uniform: return "uniform";
        case DatasetKind::Normal: return "normal";
        case DatasetKind::UniformVsNormal: return "uniform-vs-normal";
        case DatasetKind::Clustered: return "clustered";
        case DatasetKind::BrownianMotion: return "brownian";
        case DatasetKind::FractionalBrownianMotion: return "fbm";
    }
    return "unknown";
}

DatasetKind parse_dataset_kind(const std::string& name) {
    if (name == "uniform") return DatasetKind::Uniform;
    if (name == "normal") return DatasetKind::Normal;
    if (name == "uniform-vs-normal" || name == "uvn") return DatasetKind::UniformVsNormal;
    if (name == "clustered") return DatasetKind::Clustered;
    if (name == "brownian" || name == "bm") return DatasetKind::BrownianMotion;
    if (name == "fbm") return DatasetKind::FractionalBrownianMotion;
    fail(ErrorKind::InvalidInput, "unknown dataset kind '" + name + "'");
}

void DatasetSpec::validate() const {
    if (n < 1) fail(ErrorKind::InvalidInput, "dataset needs n >= 1");
    if (dim < 1 || dim > kMaxDim) fail(ErrorKind::InvalidInput, "dataset dimension must be in [1, 7]");
    if (kind == DatasetKind::FractionalBrownianMotion && !(hurst > 0.0 && hurst < 1.0)) {
        fail(ErrorKind::InvalidInput, "Hurst index must lie in (0, 1), got " + std::to_string(hurst));
    }
    if (clusters_per_level < 2) fail(ErrorKind::InvalidInput, "clustered data needs at least 2 clusters per level");
    if (!(cluster_decay > 0.0 && cluster_decay < 1.0)) {
        fail(ErrorKind::InvalidInput, "cluster decay must lie in (0, 1)");
    }
}

std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t repeat) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(repeat),
                      static_cast<std::uint32_t>(repeat >> 32)};
    return std::mt19937_64(seq);
}

Points generate(const DatasetSpec& spec) {
    spec.validate();
    auto rng = make_rng(spec.seed, Stream::X);
    Points out(spec.n, spec.dim);
    switch (spec.kind) {
        case DatasetKind::Uniform:
        case DatasetKind::UniformVsNormal: fill_uniform(out, rng); return out;
        case DatasetKind::Normal: fill_normal(out, rng); return out;
        case DatasetKind::Clustered: return clustered(spec, rng);
        case DatasetKind::BrownianMotion: return paths(spec, 0.5, rng);
        case DatasetKind::FractionalBrownianMotion: return paths(spec, spec.hurst, rng);
    }
    return out;
}

Points generate_sources(const DatasetSpec& spec) {
    if (spec.kind != DatasetKind::UniformVsNormal) return generate(spec);
    spec.validate();
    auto rng = make_rng(spec.seed, Stream::Y);
    Points out(spec.n, spec.dim);
    fill_normal(out, rng);
    return out;
}

std::vector<double> normal_vector(std::size_t n, std::uint64_t seed, Stream stream, std::uint64_t repeat) {
    auto rng = make_rng(seed, stream, repeat);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(n);
    for (double& value : out) value = normal(rng);
    return out;
}

ClusterHierarchy cluster_hierarchy(std::size_t dim, std::size_t levels, std::size_t clusters, double decay,
                                   std::mt19937_64& rng) {
    ClusterHierarchy tree;
    double spread = 1.0;
    for (std::size_t level = 0; level < levels; ++level) {
        const std::size_t parents = level == 0 ? 1 : tree.levels.back().size();
        Points centers(parents * clusters, dim);
        std::normal_distribution<double> normal(0.0, spread);
        for (std::size_t p = 0; p < parents; ++p) {
            for (std::size_t c = 0; c < clusters; ++c) {
                for (std::size_t d = 0; d < dim; ++d) {
                    const double base = level == 0 ? 0.0 : tree.levels.back()(p, d);
                    centers(p * clusters + c, d) = base + normal(rng);
                }
            }
        }
        tree.levels.push_back(std::move(centers));
        tree.spread.push_back(spread);
        spread *= decay;
    }
    return tree;
}

std::vector<double> fbm_path(std::size_t n, double hurst, std::mt19937_64& rng) {
    if (n < 1) fail(ErrorKind::InvalidInput, "fBm path needs n >= 1");
    if (!(hurst > 0.0 && hurst < 1.0)) fail(ErrorKind::InvalidInput, "Hurst index must lie in (0, 1)");
    std::vector<double> increments;
    double scale = 0.0;
    if (hurst == 0.5) {
        std::normal_distribution<double> normal(0.0, 1.0);
        increments.resize(n);
        for (double& value : increments) value = normal(rng);
        scale = std::sqrt(1.0 / static_cast<double>(n));
    } else {
        increments = n <= kHoskingLimit ? fgn_hosking(n, hurst, rng) : fgn_circulant(n, hurst, rng);
        scale = std::pow(static_cast<double>(n), -hurst);
    }
    double running = 0.0;
    for (double& value : increments) {
        running += value * scale;
        value = running;
    }
    return increments;
}

std::vector<double> population_variance(const Points& x) {
    std::vector<double> var(x.dim(), 0.0);
    if (x.empty()) return var;
    // Two-pass sums in extended precision with the residual-mean correction.
    const long double n = static_cast<long double>(x.size());
    for (std::size_t d = 0; d < x.dim(); ++d) {
        long double mean = 0.0L;
        for (std::size_t i = 0; i < x.size(); ++i) mean += x(i, d);
        mean /= n;
        long double acc = 0.0L;
        long double drift = 0.0L;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const long double diff = x(i, d) - mean;
            acc += diff * diff;
            drift += diff;
        }
        var[d] = static_cast<double>(std::max(0.0L, (acc - drift * drift / n) / n));
    }
    return var;
}

double compute_effective_variance(const Points& x, double gamma) {
    if (x.size() < 2) fail(ErrorKind::InvalidInput, "effective variance needs at least two points");
    if (!(gamma > 0.0)) fail(ErrorKind::InvalidSpec, "lengthscale must be positive");
    double total = 0.0;
    for (double v : population_variance(x)) total += v;
    return total / (2.0 * gamma * gamma);
}

double solve_gamma_for_ev(const Points& x, double target) {
    if (!(target > 0.0) || !std::isfinite(target)) fail(ErrorKind::InvalidInput, "target EV must be positive");
    if (x.size() < 2) fail(ErrorKind::InvalidInput, "EV targeting needs at least two points");
    double total = 0.0;
    for (double v : population_variance(x)) total += v;
    if (!(total > 0.0)) fail(ErrorKind::InvalidInput, "data has zero variance; no lengthscale reaches the target EV");
    return std::sqrt(total / (2.0 * target));
}

}  // namespace f3m
