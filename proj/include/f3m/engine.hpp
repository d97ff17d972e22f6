#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "f3m/box_tree.hpp"
#include "f3m/chebyshev.hpp"
#include "f3m/far_field.hpp"
#include "f3m/kernel.hpp"
#include "f3m/points.hpp"

namespace f3m {

struct F3MConfig {
    /// Total interpolation nodes per box grid; default min(4^D, cap).
    std::optional<std::size_t> node_budget;
    /// Effective-variance limit of the smoothness criterion.
    double eta = 0.5;
    /// Small-field occupancy threshold; default twice the grid node count.
    std::optional<std::size_t> rho;
    /// Division stops once a tree's largest active box holds at most zeta points;
    /// default the grid node count.
    std::optional<std::size_t> zeta;
    GridLayout layout = GridLayout::FullTensor;
    std::size_t node_cap = kDefaultNodeCap;
    /// 0 uses the OpenMP default.
    int threads = 0;
    /// Work is partitioned by target box, so results never depend on the thread
    /// count; the flag is kept for manifests.
    bool deterministic = true;
    Precision precision = Precision::F64;
    /// When false every pair stays in the near field (the tree still divides).
    bool classify = true;
    /// Single dense block, no division.
    bool exact = false;

    void validate() const;
};

/// Config with every default filled in for a given dimension.
struct ResolvedConfig {
    std::size_t grid_nodes = 0;
    std::size_t rho = 0;
    std::size_t zeta = 0;
    int threads = 1;
};

[[nodiscard]] ResolvedConfig resolve(const F3MConfig& cfg, std::size_t dim);

struct FieldPartition {
    std::vector<Interaction> near;
    std::vector<Interaction> far;
    std::vector<Interaction> smooth;
    std::vector<Interaction> small;
};

/// Tags each pair far, smooth, small or near, in that precedence. Throws
/// InvalidState when the levels are at different depths.
[[nodiscard]] FieldPartition classify(std::span<const Interaction> pairs, const BoxTreeLevel& level_x,
                                      const BoxTreeLevel& level_y, const KernelSpec& kernel, double eta,
                                      std::size_t rho);

struct DepthStats {
    int depth = 0;
    double edge = 0.0;
    std::size_t boxes_x = 0;
    std::size_t boxes_y = 0;
    std::size_t empty_x = 0;  // child slots removed as empty
    std::size_t empty_y = 0;
    std::size_t expanded = 0;  // M_{i-1} * 2^{2D}; 1 at depth 0
    std::size_t removed_empty = 0;
    std::size_t m_far = 0;
    std::size_t m_smooth = 0;
    std::size_t m_small = 0;
    std::size_t m_near = 0;  // M_i
    std::size_t far_skipped = 0;
    std::size_t far_nodes = 0;  // node count used for far pairs at this depth
};

struct RunStats {
    std::vector<DepthStats> depths;
    int final_depth = 0;
    std::size_t flushed_near = 0;
    std::size_t grid_nodes = 0;
    std::size_t rho = 0;
    std::size_t zeta = 0;
    double cube_edge = 0.0;
    double build_seconds = 0.0;
    double apply_seconds = 0.0;
};

/// The approximate operator K_hat(X, Y): trees, interaction lists and node
/// kernels are built once, and apply() may then be called any number of times
/// (concurrently as well) with different weight vectors.
class F3MOperator {
  public:
    F3MOperator(const Points& x, const Points& y, const KernelSpec& kernel, const F3MConfig& cfg);
    ~F3MOperator();
    F3MOperator(F3MOperator&&) noexcept;
    F3MOperator& operator=(F3MOperator&&) noexcept;

    [[nodiscard]] std::size_t rows() const noexcept;
    [[nodiscard]] std::size_t cols() const noexcept;
    [[nodiscard]] const RunStats& stats() const noexcept;

    [[nodiscard]] std::vector<double> apply(std::span<const double> b) const;
    void apply(std::span<const double> b, std::span<double> out) const;

  private:
    struct Plan;
    std::unique_ptr<Plan> plan_;
};

struct MatvecResult {
    std::vector<double> v;
    RunStats stats;
};

[[nodiscard]] MatvecResult f3m_matvec(const Points& x, const Points& y, std::span<const double> b,
                                      const KernelSpec& kernel, const F3MConfig& cfg);

struct AccountingRow {
    int depth = 0;
    std::size_t expanded = 0;
    std::size_t surviving = 0;
    std::size_t removed_empty = 0;
    std::size_t m_far = 0;
    std::size_t m_smooth = 0;
    std::size_t m_small = 0;
    std::size_t empty_product = 0;  // empty_x * empty_y
    bool holds = false;
};

struct AccountingReport {
    std::vector<AccountingRow> rows;
    std::size_t peak_interactions = 0;
};

/// Checks M_i + removed_i + m_far + m_smooth + m_small = M_{i-1} 2^{2D} at every
/// depth. Throws InternalConsistency on any violation.
[[nodiscard]] AccountingReport account(const RunStats& stats, std::size_t dim);

}  // namespace f3m
