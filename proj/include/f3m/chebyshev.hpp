#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "f3m/points.hpp"

namespace f3m {

/// Default ceiling on the number of nodes in one box grid.
inline constexpr std::size_t kDefaultNodeCap = 2048;

/// Chebyshev nodes of the second kind, s_i = cos(i*pi/r) for i = 0..r, in
/// decreasing order. Computed as sin(pi*(r-2i)/(2r)) so the set is exactly
/// symmetric and the middle node of an even degree is exactly zero.
/// Throws InvalidDegree for r < 1.
[[nodiscard]] std::vector<double> chebyshev_nodes(int degree);

/// w_i = (-1)^i * delta_i with delta halved at both endpoints. Throws InvalidDegree for r < 1.
[[nodiscard]] std::vector<double> barycentric_weights(int degree);

/// One-dimensional barycentric Lagrange basis on [-1, 1].
///
/// Degree 0 is the constant interpolant through the single node 0; it is only
/// reachable through this class, never through chebyshev_nodes().
class ChebyshevBasis1D {
  public:
    explicit ChebyshevBasis1D(int degree);

    [[nodiscard]] int degree() const noexcept { return degree_; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] std::span<const double> nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }

    /// Writes L_0(t)..L_r(t) into out (size r+1). A t equal to a node yields the
    /// unit vector for that node.
    void evaluate(double t, std::span<double> out) const noexcept;

  private:
    int degree_;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

[[nodiscard]] std::vector<double> eval_basis(double t, const ChebyshevBasis1D& basis);

enum class GridLayout { FullTensor, Sparse };

/// Interpolation nodes on the reference cube [-1, 1]^D together with the rule
/// for evaluating the D-dimensional Lagrange basis at a reference point.
///
/// A full tensor grid is the lexicographic Cartesian product of one 1-D node set
/// (last coordinate fastest). A sparse grid is a Smolyak combination of nested
/// Clenshaw-Curtis tensor grids: 1-D level j has 2^j + 1 nodes (level 0 is the
/// single node 0) and the terms are the multi-indices with |j|_1 <= level,
/// weighted by the combination-technique coefficients. The basis value of a
/// union node is the coefficient-weighted sum of its basis values over terms.
class NodeGrid {
  public:
    struct Term {
        std::array<int, kMaxDim> levels{};
        double coefficient = 0.0;
        std::vector<std::uint32_t> node_ids;  // term-local lexicographic node -> union node
    };

    static NodeGrid full_tensor(std::size_t dim, int degree, std::size_t cap = kDefaultNodeCap);
    static NodeGrid sparse(std::size_t dim, int level, std::size_t cap = kDefaultNodeCap);

    /// Grid for a total node budget. Full tensor: the largest per-axis node count k
    /// with k^D <= budget (at least one node). Sparse: the smallest level whose node
    /// count reaches the budget, falling back to the largest level under the cap.
    static NodeGrid for_budget(std::size_t dim, GridLayout layout, std::size_t budget,
                               std::size_t cap = kDefaultNodeCap);

    /// Node count of a sparse grid without materialising it.
    static std::size_t sparse_size(std::size_t dim, int level);

    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] GridLayout layout() const noexcept { return layout_; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    /// Per-axis degree for full tensor grids, Smolyak level for sparse grids.
    [[nodiscard]] int parameter() const noexcept { return parameter_; }
    [[nodiscard]] const Points& nodes() const noexcept { return nodes_; }
    [[nodiscard]] std::span<const Term> terms() const noexcept { return terms_; }
    /// The shared 1-D basis of a full tensor grid.
    [[nodiscard]] const ChebyshevBasis1D& axis_basis() const noexcept { return bases_.front(); }

    [[nodiscard]] std::size_t scratch_size() const noexcept { return scratch_size_; }

    /// out[k] = value of the k-th node's Lagrange basis at reference point t.
    /// `scratch` must hold scratch_size() doubles.
    void evaluate(std::span<const double> t, std::span<double> out, std::span<double> scratch) const noexcept;
    [[nodiscard]] std::vector<double> evaluate(std::span<const double> t) const;

  private:
    NodeGrid() = default;

    std::size_t dim_ = 0;
    GridLayout layout_ = GridLayout::FullTensor;
    int parameter_ = 0;
    Points nodes_;
    std::vector<ChebyshevBasis1D> bases_;  // full: one basis; sparse: index = level
    std::vector<std::size_t> basis_offsets_;  // sparse: scratch offset of level j's values
    std::vector<Term> terms_;
    std::size_t scratch_size_ = 0;
};

/// Grid for a layout parameter: the per-axis degree for FullTensor, the level for Sparse.
[[nodiscard]] NodeGrid build_grid(std::size_t dim, GridLayout layout, int parameter,
                                  std::size_t cap = kDefaultNodeCap);

/// Branches of the adaptive far-field node rule, keyed on q = l^2 / (2 gamma^2).
enum class FarFieldBranch {
    Coarse,  // q <= 0.01: min(r, 3^D) nodes
    Full,    // 0.01 < q <= 5: the requested r nodes
    Skip,    // q > 5: contribution approximated by zero
};

[[nodiscard]] FarFieldBranch far_field_branch(double edge, double lengthscale);

/// Node budget for a far-field interaction at box edge l; 0 means skip.
[[nodiscard]] std::size_t adaptive_node_count(double edge, double lengthscale, std::size_t requested,
                                              std::size_t dim);

/// b^e saturated at `limit`.
[[nodiscard]] std::size_t saturating_pow(std::size_t base, std::size_t exponent, std::size_t limit);

}  // namespace f3m
