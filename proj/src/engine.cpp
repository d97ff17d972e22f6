#include "f3m/engine.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <new>
#include <string>

#include <omp.h>

#include "f3m/error.hpp"

namespace f3m {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint32_t kUnused = std::numeric_limits<std::uint32_t>::max();
// Node-kernel storage per depth, in doubles. Dense tables past the first limit give way
// to product form for separable kernels; storage past the second is refused.
constexpr std::size_t kDenseNodeKernelBudget = std::size_t{1} << 23;
constexpr std::size_t kNodeKernelLimit = std::size_t{1} << 26;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct CompactBox {
    std::uint32_t start = 0;
    std::uint32_t count = 0;
};

// Pairs sharing one node grid, applied in three stages.
struct FieldBatch {
    const NodeGrid* grid = nullptr;
    std::vector<Interaction> pairs;
    std::vector<std::uint32_t> kernel_ids;
    std::vector<NodeKernel> kernels;
    std::vector<std::uint32_t> sources;  // compact source boxes needing a moment
    std::vector<std::uint32_t> slots;    // per pair: index into sources
    std::vector<std::size_t> groups;     // first pair of each target box, plus the end
};

struct LevelPlan {
    int depth = 0;
    double edge = 0.0;
    std::vector<CompactBox> x_boxes;
    std::vector<CompactBox> y_boxes;
    std::vector<double> x_centers;
    std::vector<double> y_centers;
    std::vector<Interaction> exact;  // small pairs, or the final near-field flush
    std::vector<std::size_t> exact_groups;
    std::vector<FieldBatch> batches;
};

std::vector<std::size_t> group_starts(std::span<const Interaction> pairs) {
    std::vector<std::size_t> starts;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (k == 0 || pairs[k].p != pairs[k - 1].p) starts.push_back(k);
    }
    starts.push_back(pairs.size());
    return starts;
}

std::vector<Interaction> merge_sorted(const std::vector<Interaction>& a, const std::vector<Interaction>& b) {
    std::vector<Interaction> out(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
    return out;
}

std::vector<std::uint8_t> active_mask(std::span<const Interaction> pairs, std::size_t boxes, bool x_side) {
    std::vector<std::uint8_t> mask(boxes, 0);
    for (const Interaction& pair : pairs) mask[x_side ? pair.p : pair.q] = 1;
    return mask;
}

std::size_t max_active(const BoxTreeLevel& level, std::span<const std::uint8_t> mask) {
    std::size_t best = 0;
    for (std::size_t p = 0; p < level.boxes.size(); ++p) {
        if (mask[p] != 0) best = std::max<std::size_t>(best, level.boxes[p].count);
    }
    return best;
}

}  // namespace

void F3MConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) fail(ErrorKind::InvalidSpec, "eta must be positive and finite");
    if (zeta && *zeta < 1) fail(ErrorKind::InvalidSpec, "zeta must be >= 1");
    if (node_cap < 1) fail(ErrorKind::InvalidSpec, "node cap must be >= 1");
    if (node_budget && (*node_budget < 2 || *node_budget > node_cap)) {
        fail(ErrorKind::InvalidSpec, "node budget must lie in [2, " + std::to_string(node_cap) + "], got " +
                                         std::to_string(*node_budget));
    }
    if (threads < 0) fail(ErrorKind::InvalidSpec, "thread count must be >= 0");
}

ResolvedConfig resolve(const F3MConfig& cfg, std::size_t dim) {
    cfg.validate();
    const std::size_t budget = cfg.node_budget.value_or(saturating_pow(4, dim, cfg.node_cap));
    ResolvedConfig out;
    out.grid_nodes = NodeGrid::for_budget(dim, cfg.layout, budget, cfg.node_cap).size();
    out.rho = cfg.rho.value_or(2 * out.grid_nodes);
    out.zeta = cfg.zeta.value_or(out.grid_nodes);
    out.threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
    return out;
}

FieldPartition classify(std::span<const Interaction> pairs, const BoxTreeLevel& level_x, const BoxTreeLevel& level_y,
                        const KernelSpec& kernel, double eta, std::size_t rho) {
    if (level_x.depth != level_y.depth) {
        fail(ErrorKind::InvalidState, "classification needs both trees at one depth, got " +
                                          std::to_string(level_x.depth) + " and " + std::to_string(level_y.depth));
    }
    kernel.validate();
    const std::size_t dim = level_x.dim;
    const double l = level_x.edge();
    const double gamma = kernel.lengthscale;
    const bool smooth = static_cast<double>(dim) * l * l / (4.0 * gamma * gamma) <= eta;

    // Center offsets in units of l: (alpha_x - alpha_y) / l + (c_p - c_q), exact when the corners coincide.
    std::array<double, kMaxDim> corner_shift{};
    for (std::size_t d = 0; d < dim; ++d) corner_shift[d] = (level_x.alpha[d] - level_y.alpha[d]) / l;

    FieldPartition out;
    for (const Interaction& pair : pairs) {
        const Box& bx = level_x.boxes[pair.p];
        const Box& by = level_y.boxes[pair.q];
        double dist2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double cells = static_cast<double>(static_cast<std::int64_t>(bx.cell[d]) -
                                                     static_cast<std::int64_t>(by.cell[d]));
            const double delta = corner_shift[d] + cells;
            dist2 += delta * delta;
        }
        if (dist2 >= 4.0) {
            out.far.push_back(pair);
        } else if (smooth) {
            out.smooth.push_back(pair);
        } else if (static_cast<std::size_t>(bx.count) + by.count <= rho) {
            out.small.push_back(pair);
        } else {
            out.near.push_back(pair);
        }
    }
    return out;
}

struct F3MOperator::Plan {
    Plan(const KernelSpec& spec, const F3MConfig& config) : kernel(spec), cfg(config) {}

    std::size_t dim = 0;
    Kernel kernel;
    F3MConfig cfg;
    ResolvedConfig resolved;
    Points xs;  // coordinates in final permutation order
    Points ys;
    std::vector<std::uint32_t> perm_x;
    std::vector<std::uint32_t> perm_y;
    std::optional<NodeGrid> grid;
    std::optional<NodeGrid> coarse_grid;
    std::vector<LevelPlan> levels;
    RunStats stats;

    struct BatchSpec {
        const NodeGrid* grid;
        std::vector<Interaction> pairs;
    };

    void build(const Points& x, const Points& y);
    LevelPlan make_level(const BoxTreeLevel& lx, const BoxTreeLevel& ly, std::vector<Interaction> exact,
                         std::vector<BatchSpec> batches) const;
    const NodeGrid& far_grid(double edge);
    void apply(std::span<const double> b, std::span<double> out) const;
};

LevelPlan F3MOperator::Plan::make_level(const BoxTreeLevel& lx, const BoxTreeLevel& ly,
                                        std::vector<Interaction> exact, std::vector<BatchSpec> batches) const {
    LevelPlan level;
    level.depth = lx.depth;
    level.edge = lx.edge();

    // Keep only the boxes some pair refers to; the renumbering is monotone, so sortedness survives.
    std::vector<std::uint32_t> remap_x(lx.boxes.size(), kUnused);
    std::vector<std::uint32_t> remap_y(ly.boxes.size(), kUnused);
    auto mark = [&](const std::vector<Interaction>& pairs) {
        for (const Interaction& pair : pairs) {
            remap_x[pair.p] = 0;
            remap_y[pair.q] = 0;
        }
    };
    mark(exact);
    for (const BatchSpec& batch : batches) mark(batch.pairs);

    auto compact = [&](const BoxTreeLevel& tree, std::vector<std::uint32_t>& remap, std::vector<CompactBox>& boxes,
                       std::vector<double>& centers, std::vector<std::uint32_t>& original) {
        for (std::size_t p = 0; p < remap.size(); ++p) {
            if (remap[p] == kUnused) continue;
            remap[p] = static_cast<std::uint32_t>(boxes.size());
            boxes.push_back({tree.boxes[p].start, tree.boxes[p].count});
            original.push_back(static_cast<std::uint32_t>(p));
            const std::size_t offset = centers.size();
            centers.resize(offset + dim);
            tree.center(p, {centers.data() + offset, dim});
        }
    };
    std::vector<std::uint32_t> original_x;
    std::vector<std::uint32_t> original_y;
    compact(lx, remap_x, level.x_boxes, level.x_centers, original_x);
    compact(ly, remap_y, level.y_boxes, level.y_centers, original_y);

    auto renumber = [&](std::vector<Interaction>& pairs) {
        for (Interaction& pair : pairs) pair = {remap_x[pair.p], remap_y[pair.q]};
    };
    renumber(exact);
    level.exact_groups = group_starts(exact);
    level.exact = std::move(exact);

    const double l = level.edge;
    std::size_t dense_doubles = 0;
    for (BatchSpec& spec : batches) {
        if (spec.pairs.empty()) continue;
        renumber(spec.pairs);
        FieldBatch batch;
        batch.grid = spec.grid;
        batch.pairs = std::move(spec.pairs);
        batch.groups = group_starts(batch.pairs);

        // One node kernel per distinct integer cell offset between the two boxes.
        std::map<std::array<std::int64_t, kMaxDim>, std::uint32_t> kernel_index;
        std::vector<double> delta(dim);
        batch.kernel_ids.reserve(batch.pairs.size());
        for (const Interaction& pair : batch.pairs) {
            const Box& bx = lx.boxes[original_x[pair.p]];
            const Box& by = ly.boxes[original_y[pair.q]];
            std::array<std::int64_t, kMaxDim> key{};
            for (std::size_t d = 0; d < dim; ++d) {
                key[d] = static_cast<std::int64_t>(bx.cell[d]) - static_cast<std::int64_t>(by.cell[d]);
            }
            auto [it, inserted] = kernel_index.try_emplace(key, static_cast<std::uint32_t>(batch.kernels.size()));
            if (inserted) {
                for (std::size_t d = 0; d < dim; ++d) {
                    delta[d] = (lx.alpha[d] - ly.alpha[d]) + static_cast<double>(key[d]) * l;
                }
                const std::size_t dense_size = batch.grid->size() * batch.grid->size();
                batch.kernels.emplace_back(kernel, *batch.grid, l, delta,
                                           dense_doubles + dense_size <= kDenseNodeKernelBudget);
                dense_doubles += batch.kernels.back().footprint();
                if (dense_doubles > kNodeKernelLimit) {
                    fail(ErrorKind::Resource, "node kernels at depth " + std::to_string(level.depth) +
                                                  " exceed the memory budget; lower the node budget");
                }
            }
            batch.kernel_ids.push_back(it->second);
        }

        std::vector<std::uint32_t> slot_of(level.y_boxes.size(), kUnused);
        for (const Interaction& pair : batch.pairs) slot_of[pair.q] = 0;
        for (std::size_t q = 0; q < slot_of.size(); ++q) {
            if (slot_of[q] == kUnused) continue;
            slot_of[q] = static_cast<std::uint32_t>(batch.sources.size());
            batch.sources.push_back(static_cast<std::uint32_t>(q));
        }
        batch.slots.reserve(batch.pairs.size());
        for (const Interaction& pair : batch.pairs) batch.slots.push_back(slot_of[pair.q]);
        level.batches.push_back(std::move(batch));
    }
    return level;
}

const NodeGrid& F3MOperator::Plan::far_grid(double edge) {
    const FarFieldBranch branch = far_field_branch(edge, kernel.lengthscale());
    if (branch != FarFieldBranch::Coarse) return *grid;
    if (!coarse_grid) {
        if (cfg.layout == GridLayout::Sparse) {
            coarse_grid = NodeGrid::sparse(dim, 1, cfg.node_cap);
        } else {
            const std::size_t budget = adaptive_node_count(edge, kernel.lengthscale(), grid->size(), dim);
            coarse_grid = NodeGrid::for_budget(dim, GridLayout::FullTensor, budget, cfg.node_cap);
        }
        if (coarse_grid->size() >= grid->size()) coarse_grid.reset();
    }
    return coarse_grid ? *coarse_grid : *grid;
}

void F3MOperator::Plan::build(const Points& x, const Points& y) {
    const std::size_t budget = cfg.node_budget.value_or(saturating_pow(4, dim, cfg.node_cap));
    grid = NodeGrid::for_budget(dim, cfg.layout, budget, cfg.node_cap);
    stats.grid_nodes = resolved.grid_nodes;
    stats.rho = resolved.rho;
    stats.zeta = resolved.zeta;

    const EnclosingCubes cubes = compute_enclosing_cube(x, y);
    stats.cube_edge = cubes.edge;
    BoxTreeLevel lx = root_level(x, cubes.x);
    BoxTreeLevel ly = root_level(y, cubes.y);
    std::vector<Interaction> near{{0, 0}};

    DepthStats root;
    root.edge = cubes.edge;
    root.boxes_x = 1;
    root.boxes_y = 1;
    root.expanded = 1;
    root.m_near = 1;
    stats.depths.push_back(root);

    const std::size_t fanout2 = std::size_t{1} << (2 * dim);
    std::size_t max_x = x.size();
    std::size_t max_y = y.size();
    const bool divide = !cfg.exact && cubes.edge > 0.0;
    // With X and Y the same object the pair list stays symmetric and both trees coincide.
    const bool shared = &x == &y;
    while (divide && !near.empty() && max_x > resolved.zeta && max_y > resolved.zeta && lx.depth < kMaxDepth) {
        try {
            const auto mask_x = active_mask(near, lx.boxes.size(), true);
            const auto mask_y = active_mask(near, ly.boxes.size(), false);
            BoxTreeLevel nx = divide_level(lx, x, mask_x);
            BoxTreeLevel ny = shared ? nx : divide_level(ly, y, mask_y);
            std::vector<Interaction> children = divide_interactions(near, nx.child_begin, ny.child_begin);

            DepthStats row;
            row.depth = nx.depth;
            row.edge = nx.edge();
            row.boxes_x = nx.boxes.size();
            row.boxes_y = ny.boxes.size();
            row.empty_x = nx.empty_removed;
            row.empty_y = ny.empty_removed;
            row.expanded = near.size() * fanout2;
            row.removed_empty = row.expanded - children.size();

            FieldPartition part;
            if (cfg.classify) {
                part = classify(children, nx, ny, kernel.spec(), cfg.eta, resolved.rho);
            } else {
                part.near = std::move(children);
            }
            row.m_far = part.far.size();
            row.m_smooth = part.smooth.size();
            row.m_small = part.small.size();
            row.m_near = part.near.size();

            std::vector<BatchSpec> batches;
            const FarFieldBranch branch = far_field_branch(row.edge, kernel.lengthscale());
            if (branch == FarFieldBranch::Skip) {
                row.far_skipped = part.far.size();
                batches.push_back({&*grid, std::move(part.smooth)});
            } else {
                const NodeGrid& fg = far_grid(row.edge);
                row.far_nodes = fg.size();
                if (&fg == &*grid) {
                    batches.push_back({&fg, merge_sorted(part.far, part.smooth)});
                } else {
                    batches.push_back({&fg, std::move(part.far)});
                    batches.push_back({&*grid, std::move(part.smooth)});
                }
            }
            levels.push_back(make_level(nx, ny, std::move(part.small), std::move(batches)));
            stats.depths.push_back(row);

            near = std::move(part.near);
            lx = std::move(nx);
            ly = std::move(ny);
            if (!near.empty()) {
                max_x = max_active(lx, active_mask(near, lx.boxes.size(), true));
                max_y = max_active(ly, active_mask(near, ly.boxes.size(), false));
            }
        } catch (const std::bad_alloc&) {
            fail(ErrorKind::Resource, "out of memory while building depth " + std::to_string(lx.depth + 1));
        }
    }
    stats.final_depth = lx.depth;
    stats.flushed_near = near.size();
    if (!near.empty()) levels.push_back(make_level(lx, ly, std::move(near), {}));

    perm_x = std::move(lx.permutation);
    perm_y = std::move(ly.permutation);
    xs = Points(x.size(), dim);
    for (std::size_t k = 0; k < perm_x.size(); ++k) {
        const auto src = x.row(perm_x[k]);
        std::copy(src.begin(), src.end(), xs.row(k).begin());
    }
    if (shared) {
        ys = xs;
        return;
    }
    ys = Points(y.size(), dim);
    for (std::size_t k = 0; k < perm_y.size(); ++k) {
        const auto src = y.row(perm_y[k]);
        std::copy(src.begin(), src.end(), ys.row(k).begin());
    }
}

void F3MOperator::Plan::apply(std::span<const double> b, std::span<double> out) const {
    std::vector<double> bp(perm_y.size());
    for (std::size_t k = 0; k < perm_y.size(); ++k) bp[k] = b[perm_y[k]];
    std::vector<double> vp(perm_x.size(), 0.0);
    const auto xdata = xs.data();
    const auto ydata = ys.data();
    const int nthreads = resolved.threads;

    for (const LevelPlan& level : levels) {
        const std::size_t exact_groups = level.exact_groups.size() - 1;
#pragma omp parallel for schedule(dynamic, 4) num_threads(nthreads)
        for (std::size_t g = 0; g < exact_groups; ++g) {
            const std::size_t first = level.exact_groups[g];
            const std::size_t last = level.exact_groups[g + 1];
            const CompactBox bx = level.x_boxes[level.exact[first].p];
            const auto xblock = xdata.subspan(std::size_t{bx.start} * dim, std::size_t{bx.count} * dim);
            const std::span<double> target(vp.data() + bx.start, bx.count);
            for (std::size_t k = first; k < last; ++k) {
                const CompactBox by = level.y_boxes[level.exact[k].q];
                near_field_accumulate(kernel, xblock,
                                      ydata.subspan(std::size_t{by.start} * dim, std::size_t{by.count} * dim), dim,
                                      {bp.data() + by.start, by.count}, target, cfg.precision);
            }
        }

        for (const FieldBatch& batch : level.batches) {
            const NodeGrid& g = *batch.grid;
            const std::size_t m = g.size();
            const std::size_t scratch_len = m + dim + g.scratch_size();
            std::vector<double> moments(batch.sources.size() * m, 0.0);
            const std::size_t nsources = batch.sources.size();
#pragma omp parallel num_threads(nthreads)
            {
                std::vector<double> scratch(scratch_len);
#pragma omp for schedule(dynamic, 4)
                for (std::size_t s = 0; s < nsources; ++s) {
                    const std::uint32_t q = batch.sources[s];
                    const CompactBox by = level.y_boxes[q];
                    source_moments(g, {level.y_centers.data() + std::size_t{q} * dim, dim}, level.edge,
                                   ydata.subspan(std::size_t{by.start} * dim, std::size_t{by.count} * dim),
                                   {bp.data() + by.start, by.count}, {moments.data() + s * m, m}, scratch);
                }
            }

            const std::size_t ngroups = batch.groups.size() - 1;
#pragma omp parallel num_threads(nthreads)
            {
                std::vector<double> scratch(scratch_len);
                std::vector<double> local(m);
                std::vector<double> work(2 * m);
#pragma omp for schedule(dynamic, 4)
                for (std::size_t gi = 0; gi < ngroups; ++gi) {
                    const std::size_t first = batch.groups[gi];
                    const std::size_t last = batch.groups[gi + 1];
                    std::fill(local.begin(), local.end(), 0.0);
                    for (std::size_t k = first; k < last; ++k) {
                        batch.kernels[batch.kernel_ids[k]].apply({moments.data() + std::size_t{batch.slots[k]} * m, m},
                                                                 local, work);
                    }
                    const std::uint32_t p = batch.pairs[first].p;
                    const CompactBox bx = level.x_boxes[p];
                    target_evaluate(g, {level.x_centers.data() + std::size_t{p} * dim, dim}, level.edge,
                                    xdata.subspan(std::size_t{bx.start} * dim, std::size_t{bx.count} * dim), local,
                                    {vp.data() + bx.start, bx.count}, scratch);
                }
            }
        }
    }
    for (std::size_t k = 0; k < perm_x.size(); ++k) out[perm_x[k]] = vp[k];
}

F3MOperator::F3MOperator(const Points& x, const Points& y, const KernelSpec& kernel, const F3MConfig& cfg) {
    const auto start = Clock::now();
    kernel.validate();
    if (x.empty() || y.empty()) fail(ErrorKind::InvalidInput, "X and Y must be non-empty");
    if (x.dim() != y.dim()) {
        fail(ErrorKind::InvalidInput,
             "X has dimension " + std::to_string(x.dim()) + " but Y has " + std::to_string(y.dim()));
    }
    if (x.dim() < 1 || x.dim() > kMaxDim) fail(ErrorKind::InvalidInput, "dimension must be in [1, 7]");
    require_finite(x, "X");
    require_finite(y, "Y");
    plan_ = std::make_unique<Plan>(kernel, cfg);
    plan_->dim = x.dim();
    plan_->resolved = resolve(cfg, x.dim());
    plan_->build(x, y);
    plan_->stats.build_seconds = seconds_since(start);
}

F3MOperator::~F3MOperator() = default;
F3MOperator::F3MOperator(F3MOperator&&) noexcept = default;
F3MOperator& F3MOperator::operator=(F3MOperator&&) noexcept = default;

std::size_t F3MOperator::rows() const noexcept { return plan_->perm_x.size(); }
std::size_t F3MOperator::cols() const noexcept { return plan_->perm_y.size(); }
const RunStats& F3MOperator::stats() const noexcept { return plan_->stats; }

void F3MOperator::apply(std::span<const double> b, std::span<double> out) const {
    if (b.size() != cols()) {
        fail(ErrorKind::InvalidInput, "weight vector has length " + std::to_string(b.size()) + ", expected " +
                                          std::to_string(cols()));
    }
    if (out.size() != rows()) fail(ErrorKind::InvalidInput, "output vector has the wrong length");
    require_finite(b, "b");
    plan_->apply(b, out);
}

std::vector<double> F3MOperator::apply(std::span<const double> b) const {
    std::vector<double> out(rows());
    apply(b, out);
    return out;
}

MatvecResult f3m_matvec(const Points& x, const Points& y, std::span<const double> b, const KernelSpec& kernel,
                        const F3MConfig& cfg) {
    if (b.size() != y.size()) {
        fail(ErrorKind::InvalidInput, "weight vector has length " + std::to_string(b.size()) + ", expected " +
                                          std::to_string(y.size()));
    }
    const F3MOperator op(x, y, kernel, cfg);
    MatvecResult result;
    const auto start = Clock::now();
    result.v = op.apply(b);
    result.stats = op.stats();
    result.stats.apply_seconds = seconds_since(start);
    return result;
}

AccountingReport account(const RunStats& stats, std::size_t dim) {
    if (stats.depths.empty()) fail(ErrorKind::InvalidState, "accounting needs a completed run");
    AccountingReport report;
    const std::size_t fanout2 = std::size_t{1} << (2 * dim);
    for (std::size_t i = 0; i < stats.depths.size(); ++i) {
        const DepthStats& d = stats.depths[i];
        AccountingRow row;
        row.depth = d.depth;
        row.expanded = (i == 0) ? 1 : stats.depths[i - 1].m_near * fanout2;
        row.surviving = d.m_near;
        row.removed_empty = d.removed_empty;
        row.m_far = d.m_far;
        row.m_smooth = d.m_smooth;
        row.m_small = d.m_small;
        row.empty_product = d.empty_x * d.empty_y;
        row.holds = row.expanded == d.expanded &&
                    row.expanded == d.m_near + d.removed_empty + d.m_far + d.m_smooth + d.m_small;
        if (i == 0) row.holds = row.holds && d.m_near == 1;
        report.peak_interactions = std::max(report.peak_interactions, row.expanded);
        const bool holds = row.holds;
        report.rows.push_back(row);
        if (!holds) {
            fail(ErrorKind::InternalConsistency,
                 "interaction accounting fails at depth " + std::to_string(d.depth) + ": expanded " +
                     std::to_string(row.expanded) + " vs near " + std::to_string(d.m_near) + " + empty " +
                     std::to_string(d.removed_empty) + " + far " + std::to_string(d.m_far) + " + smooth " +
                     std::to_string(d.m_smooth) + " + small " + std::to_string(d.m_small));
        }
    }
    return report;
}

}  // namespace f3m
