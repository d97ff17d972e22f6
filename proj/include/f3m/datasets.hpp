#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "f3m/points.hpp"

namespace f3m {

enum class DatasetKind { Uniform, Normal, UniformVsNormal, Clustered, BrownianMotion, FractionalBrownianMotion };

[[nodiscard]] const char* to_string(DatasetKind kind) noexcept;
/// Accepts uniform, normal, uniform-vs-normal (or uvn), clustered, brownian (or bm), fbm.
[[nodiscard]] DatasetKind parse_dataset_kind(const std::string& name);

struct DatasetSpec {
    DatasetKind kind = DatasetKind::Uniform;
    std::size_t n = 1000;
    std::size_t dim = 3;
    std::uint64_t seed = 0;
    double hurst = 0.75;  // fbm only
    std::size_t clusters_per_level = 10;
    double cluster_decay = 0.3;

    void validate() const;
};

/// Random streams derived from one seed: independent generators for X, Y, b, splits, ...
enum class Stream : std::uint64_t { X = 0, Y = 1, Weights = 2, Split = 3, Subset = 4, Noise = 5, Signal = 6 };

[[nodiscard]] std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t repeat = 0);

/// The X set for the spec. For UniformVsNormal this is the uniform side.
[[nodiscard]] Points generate(const DatasetSpec& spec);

/// The Y set: standard normal for UniformVsNormal, otherwise the same points as generate().
[[nodiscard]] Points generate_sources(const DatasetSpec& spec);

/// i.i.d. standard normal vector, e.g. the KMVM weights b.
[[nodiscard]] std::vector<double> normal_vector(std::size_t n, std::uint64_t seed, Stream stream,
                                                std::uint64_t repeat = 0);

/// Centers of a recursive cluster hierarchy; level k holds clusters^k centers
/// drawn around their parents with standard deviation decay^(k-1).
struct ClusterHierarchy {
    std::vector<Points> levels;
    std::vector<double> spread;
};

[[nodiscard]] ClusterHierarchy cluster_hierarchy(std::size_t dim, std::size_t levels, std::size_t clusters,
                                                 double decay, std::mt19937_64& rng);

/// One fractional Brownian motion path at times k/n, k = 1..n, starting from 0.
/// H = 0.5 is the plain Brownian path (cumulative N(0, 1/n) increments).
[[nodiscard]] std::vector<double> fbm_path(std::size_t n, double hurst, std::mt19937_64& rng);

/// Per-dimension variance with the 1/n normalisation.
[[nodiscard]] std::vector<double> population_variance(const Points& x);

/// Sum of per-dimension variances divided by 2 gamma^2. Needs n >= 2.
[[nodiscard]] double compute_effective_variance(const Points& x, double gamma);

/// gamma = sqrt(sum_d Var_d / (2 target)). Throws InvalidInput for constant data.
[[nodiscard]] double solve_gamma_for_ev(const Points& x, double target);

}  // namespace f3m
