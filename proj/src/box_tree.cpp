#include "f3m/box_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "f3m/error.hpp"

namespace f3m {

namespace {

void column_range(const Points& pts, std::size_t d, double& lo, double& hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        lo = std::min(lo, pts(i, d));
        hi = std::max(hi, pts(i, d));
    }
}

// Cell index without range checks; the caller guarantees alpha <= x <= alpha + edge.
std::uint64_t cell_unchecked(double x, double alpha, double edge, int depth) noexcept {
    const std::uint64_t cells = std::uint64_t{1} << depth;
    const double scaled = (x - alpha) * static_cast<double>(cells) / edge;
    const std::uint64_t last = cells - 1;
    const auto cell = static_cast<std::uint64_t>(scaled);
    return std::min(cell, last);
}

}  // namespace

EnclosingCubes compute_enclosing_cube(const Points& x, const Points& y) {
    if (x.empty() || y.empty()) fail(ErrorKind::InvalidInput, "enclosing cube needs non-empty point sets");
    if (x.dim() != y.dim()) fail(ErrorKind::InvalidInput, "X and Y dimensions differ");
    const std::size_t dim = x.dim();
    EnclosingCubes cubes;
    cubes.x.alpha.resize(dim);
    cubes.y.alpha.resize(dim);
    double edge = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        double lo = 0.0;
        double hi = 0.0;
        column_range(x, d, lo, hi);
        cubes.x.alpha[d] = lo;
        edge = std::max(edge, hi - lo);
        column_range(y, d, lo, hi);
        cubes.y.alpha[d] = lo;
        edge = std::max(edge, hi - lo);
    }
    cubes.edge = edge;
    cubes.x.edge = edge;
    cubes.y.edge = edge;
    return cubes;
}

std::uint64_t axis_cell(double x, double alpha, double edge, int depth) {
    if (!(edge > 0.0)) fail(ErrorKind::InvalidInput, "box index needs a positive cube edge");
    if (depth < 0 || depth > kMaxDepth) fail(ErrorKind::InvalidInput, "depth out of range");
    const double offset = x - alpha;
    if (!(offset >= 0.0) || offset > edge) {
        fail(ErrorKind::OutOfCube, "coordinate " + std::to_string(x) + " lies outside [" + std::to_string(alpha) +
                                       ", " + std::to_string(alpha + edge) + "]");
    }
    return cell_unchecked(x, alpha, edge, depth);
}

std::uint64_t box_index(std::span<const double> x, int depth, double edge, std::span<const double> alpha) {
    if (x.size() != alpha.size() || x.empty()) fail(ErrorKind::InvalidInput, "point and corner dimensions differ");
    if (static_cast<std::size_t>(depth) * x.size() >= 64) {
        fail(ErrorKind::InvalidInput, "box index overflows 64 bits at this depth and dimension");
    }
    std::uint64_t beta = 0;
    for (std::size_t d = 0; d < x.size(); ++d) {
        beta |= axis_cell(x[d], alpha[d], edge, depth) << (static_cast<std::size_t>(depth) * d);
    }
    return beta;
}

Grouping group_points(std::span<const std::size_t> assignments, std::size_t num_boxes) {
    Grouping g;
    g.counts.assign(num_boxes, 0);
    for (std::size_t box : assignments) {
        if (box >= num_boxes) fail(ErrorKind::InvalidInput, "box assignment out of range");
        ++g.counts[box];
    }
    g.offsets.assign(num_boxes, 0);
    std::size_t running = 0;
    for (std::size_t p = 0; p < num_boxes; ++p) {
        g.offsets[p] = running;
        running += g.counts[p];
    }
    g.permutation.resize(assignments.size());
    std::vector<std::size_t> cursor = g.offsets;
    for (std::size_t i = 0; i < assignments.size(); ++i) g.permutation[cursor[assignments[i]]++] = i;
    return g;
}

double BoxTreeLevel::edge() const noexcept { return std::ldexp(cube_edge, -depth); }

void BoxTreeLevel::center(std::size_t box, std::span<double> out) const noexcept {
    const double l = edge();
    const Box& b = boxes[box];
    for (std::size_t d = 0; d < dim; ++d) out[d] = alpha[d] + (static_cast<double>(b.cell[d]) + 0.5) * l;
}

std::vector<double> BoxTreeLevel::center(std::size_t box) const {
    std::vector<double> out(dim);
    center(box, out);
    return out;
}

std::size_t BoxTreeLevel::max_count() const noexcept {
    std::size_t best = 0;
    for (const Box& b : boxes) best = std::max<std::size_t>(best, b.count);
    return best;
}

BoxTreeLevel root_level(const Points& points, const BoundingCube& cube) {
    if (points.empty()) fail(ErrorKind::InvalidInput, "box tree needs at least one point");
    if (points.size() > std::numeric_limits<std::uint32_t>::max()) {
        fail(ErrorKind::Resource, "box tree supports at most 2^32 - 1 points");
    }
    if (cube.alpha.size() != points.dim()) fail(ErrorKind::InvalidInput, "cube and point dimensions differ");
    BoxTreeLevel level;
    level.depth = 0;
    level.dim = points.dim();
    level.cube_edge = cube.edge;
    level.alpha = cube.alpha;
    level.permutation.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) level.permutation[i] = static_cast<std::uint32_t>(i);
    Box root;
    root.count = static_cast<std::uint32_t>(points.size());
    level.boxes.push_back(root);
    return level;
}

BoxTreeLevel divide_level(const BoxTreeLevel& level, const Points& points, std::span<const std::uint8_t> active) {
    if (!(level.cube_edge > 0.0)) fail(ErrorKind::InvalidInput, "cannot divide a level with zero edge");
    if (level.depth >= kMaxDepth) fail(ErrorKind::InvalidState, "box tree already at maximum depth");
    if (!active.empty() && active.size() != level.boxes.size()) {
        fail(ErrorKind::InvalidInput, "active mask length does not match the box count");
    }
    const std::size_t dim = level.dim;
    const std::size_t fanout = std::size_t{1} << dim;
    const int child_depth = level.depth + 1;

    BoxTreeLevel next;
    next.depth = child_depth;
    next.dim = dim;
    next.cube_edge = level.cube_edge;
    next.alpha = level.alpha;
    next.permutation = level.permutation;
    next.child_begin.resize(level.boxes.size() + 1, 0);

    std::vector<std::uint32_t> keys;
    std::vector<std::uint32_t> counts(fanout);
    std::vector<std::uint32_t> cursor(fanout);
    for (std::size_t p = 0; p < level.boxes.size(); ++p) {
        next.child_begin[p] = static_cast<std::uint32_t>(next.boxes.size());
        if (!active.empty() && active[p] == 0) continue;
        const Box& parent = level.boxes[p];
        const std::uint32_t* members = level.permutation.data() + parent.start;

        keys.resize(parent.count);
        std::fill(counts.begin(), counts.end(), 0u);
        for (std::uint32_t k = 0; k < parent.count; ++k) {
            const auto row = points.row(members[k]);
            std::uint32_t key = 0;
            for (std::size_t d = 0; d < dim; ++d) {
                const std::uint64_t c = cell_unchecked(row[d], level.alpha[d], level.cube_edge, child_depth);
                key |= static_cast<std::uint32_t>(c - 2 * parent.cell[d]) << d;
            }
            keys[k] = key;
            ++counts[key];
        }

        std::uint32_t offset = parent.start;
        for (std::size_t key = 0; key < fanout; ++key) {
            cursor[key] = offset;
            if (counts[key] == 0) {
                ++next.empty_removed;
                continue;
            }
            Box child;
            for (std::size_t d = 0; d < dim; ++d) child.cell[d] = 2 * parent.cell[d] + ((key >> d) & 1u);
            child.start = offset;
            child.count = counts[key];
            child.parent = static_cast<std::uint32_t>(p);
            next.boxes.push_back(child);
            offset += counts[key];
        }
        for (std::uint32_t k = 0; k < parent.count; ++k) next.permutation[cursor[keys[k]]++] = members[k];
    }
    next.child_begin[level.boxes.size()] = static_cast<std::uint32_t>(next.boxes.size());
    return next;
}

std::vector<Interaction> divide_interactions(std::span<const Interaction> pairs,
                                             std::span<const std::uint32_t> child_begin_x,
                                             std::span<const std::uint32_t> child_begin_y) {
    std::size_t total = 0;
    for (const Interaction& pair : pairs) {
        total += static_cast<std::size_t>(child_begin_x[pair.p + 1] - child_begin_x[pair.p]) *
                 (child_begin_y[pair.q + 1] - child_begin_y[pair.q]);
    }
    std::vector<Interaction> out;
    out.reserve(total);
    // Pairs sharing a target box are expanded together so the output stays sorted.
    std::size_t group = 0;
    while (group < pairs.size()) {
        std::size_t end = group;
        while (end < pairs.size() && pairs[end].p == pairs[group].p) ++end;
        const std::uint32_t p = pairs[group].p;
        for (std::uint32_t cx = child_begin_x[p]; cx < child_begin_x[p + 1]; ++cx) {
            for (std::size_t k = group; k < end; ++k) {
                const std::uint32_t q = pairs[k].q;
                for (std::uint32_t cy = child_begin_y[q]; cy < child_begin_y[q + 1]; ++cy) out.push_back({cx, cy});
            }
        }
        group = end;
    }
    return out;
}

}  // namespace f3m
