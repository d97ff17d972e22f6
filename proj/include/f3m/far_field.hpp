#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "f3m/chebyshev.hpp"
#include "f3m/kernel.hpp"

namespace f3m {

/// A box as seen by the far-field pipeline: its bounding cube (center, edge) and
/// the row-major coordinates of the points it holds.
struct BoxRef {
    std::span<const double> center;
    double edge = 0.0;
    std::span<const double> coords;
};

/// Maps a point into the box's reference cube: t_d = 2 (x_d - c_d) / l.
inline void to_reference(std::span<const double> x, std::span<const double> center, double edge,
                         std::span<double> t) noexcept {
    const double scale = 2.0 / edge;
    for (std::size_t d = 0; d < t.size(); ++d) t[d] = (x[d] - center[d]) * scale;
}

/// Stage 1: moment += L_Y * b for the points of one box. `scratch` needs
/// grid.scratch_size() + grid.size() + grid.dim() doubles.
void source_moments(const NodeGrid& grid, std::span<const double> center, double edge,
                    std::span<const double> coords, std::span<const double> b, std::span<double> moment,
                    std::span<double> scratch) noexcept;

/// Stage 3: out += L_X^T * local for the points of one box. Same scratch as above.
void target_evaluate(const NodeGrid& grid, std::span<const double> center, double edge,
                     std::span<const double> coords, std::span<const double> local, std::span<double> out,
                     std::span<double> scratch) noexcept;

/// Stage 2 operator: the kernel between the nodes of two boxes of equal edge whose
/// centers differ by `delta` (target minus source).
///
/// For a separable kernel on a full tensor grid the m x m matrix is the Kronecker
/// product of D small per-axis matrices and is applied mode by mode. On other grids
/// it is stored densely, or, when `allow_dense` is false and the kernel is separable,
/// each entry is formed on the fly as a product of per-axis factors over the distinct
/// node coordinates.
class NodeKernel {
  public:
    enum class Storage { Kronecker, Dense, Product };

    NodeKernel(const Kernel& kernel, const NodeGrid& grid, double edge, std::span<const double> delta,
               bool allow_dense = true);

    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    [[nodiscard]] Storage storage() const noexcept { return storage_; }
    [[nodiscard]] bool factored() const noexcept { return storage_ == Storage::Kronecker; }
    /// Doubles held by this operator.
    [[nodiscard]] std::size_t footprint() const noexcept { return data_.size(); }
    /// Doubles of scratch needed by apply().
    [[nodiscard]] std::size_t work_size() const noexcept { return factored() ? 2 * size_ : 0; }

    /// out += K_nodes * in.
    void apply(std::span<const double> in, std::span<double> out, std::span<double> work) const noexcept;

  private:
    std::size_t dim_;
    std::size_t size_;
    std::size_t axis_;  // per-axis table width (Kronecker, Product)
    Storage storage_;
    std::vector<double> data_;  // D stacked axis x axis tables, or one size x size block
    std::vector<std::uint16_t> coord_index_;  // Product: node k, axis d -> table row
};

/// Full three-stage approximation of K(X_box, Y_box) * b: L_X^T (K_nodes (L_Y b)).
/// Throws DegenerateBox for a zero or non-finite edge and InvalidInput for
/// inconsistent shapes.
[[nodiscard]] std::vector<double> far_field_apply(const KernelSpec& spec, const BoxRef& box_x, const BoxRef& box_y,
                                                  std::span<const double> b_block, const NodeGrid& grid);

}  // namespace f3m
