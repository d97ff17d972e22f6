#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "f3m/points.hpp"

namespace f3m {

/// Deepest level a tree may reach; past this the box edge drops below one ulp of the cube edge.
inline constexpr int kMaxDepth = 52;

struct BoundingCube {
    std::vector<double> alpha;  // min corner
    double edge = 0.0;
};

/// X and Y get their own min corners but share one edge, the largest coordinate
/// range over both sets and all dimensions.
struct EnclosingCubes {
    BoundingCube x;
    BoundingCube y;
    double edge = 0.0;
};

[[nodiscard]] EnclosingCubes compute_enclosing_cube(const Points& x, const Points& y);

/// Per-axis cell index min(floor(2^depth (x - alpha) / edge), 2^depth - 1).
/// Throws OutOfCube when x lies outside [alpha, alpha + edge].
[[nodiscard]] std::uint64_t axis_cell(double x, double alpha, double edge, int depth);

/// Mixed-radix box index sum_d 2^(depth d) c_d. Requires D * depth < 64.
[[nodiscard]] std::uint64_t box_index(std::span<const double> x, int depth, double edge, std::span<const double> alpha);

struct Grouping {
    std::vector<std::size_t> permutation;
    std::vector<std::size_t> counts;
    std::vector<std::size_t> offsets;
};

/// Stable counting sort of point indices by box id.
[[nodiscard]] Grouping group_points(std::span<const std::size_t> assignments, std::size_t num_boxes);

struct Box {
    std::array<std::uint64_t, kMaxDim> cell{};  // integer coordinates at this depth
    std::uint32_t start = 0;                    // interval into the level permutation
    std::uint32_t count = 0;
    std::uint32_t parent = 0;
};

/// One depth of a box tree. Boxes are ordered by parent, then by child index
/// (dimension 0 is the least significant bit), so children of a parent are contiguous.
struct BoxTreeLevel {
    int depth = 0;
    std::size_t dim = 0;
    double cube_edge = 0.0;
    std::vector<double> alpha;
    std::vector<Box> boxes;
    std::vector<std::uint32_t> permutation;
    /// Children of parent p are boxes [child_begin[p], child_begin[p + 1]). Empty at depth 0.
    std::vector<std::uint32_t> child_begin;
    /// Child slots dropped as empty by the division that produced this level.
    std::size_t empty_removed = 0;

    [[nodiscard]] double edge() const noexcept;
    void center(std::size_t box, std::span<double> out) const noexcept;
    [[nodiscard]] std::vector<double> center(std::size_t box) const;
    [[nodiscard]] std::size_t max_count() const noexcept;
};

/// Depth-0 level: a single box holding every point in input order.
[[nodiscard]] BoxTreeLevel root_level(const Points& points, const BoundingCube& cube);

/// Splits every active box (all boxes when `active` is empty) into its non-empty
/// children. Points of inactive boxes keep their permutation slots and produce no children.
[[nodiscard]] BoxTreeLevel divide_level(const BoxTreeLevel& level, const Points& points,
                                        std::span<const std::uint8_t> active = {});

struct Interaction {
    std::uint32_t p = 0;  // target (X) box
    std::uint32_t q = 0;  // source (Y) box
    friend auto operator<=>(const Interaction&, const Interaction&) = default;
};

/// Expands each pair into the product of the surviving children of both boxes.
/// Sorted input yields sorted output because children are numbered in parent order.
[[nodiscard]] std::vector<Interaction> divide_interactions(std::span<const Interaction> pairs,
                                                           std::span<const std::uint32_t> child_begin_x,
                                                           std::span<const std::uint32_t> child_begin_y);

}  // namespace f3m
