#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "f3m/datasets.hpp"
#include "f3m/engine.hpp"
#include "f3m/error.hpp"
#include "f3m/oracle.hpp"
#include "support.hpp"

using namespace f3m;

namespace {

KernelSpec gaussian(double gamma) { return {KernelKind::Gaussian, gamma}; }

BoxTreeLevel hand_level(int depth, std::size_t dim, double cube_edge, std::vector<Box> boxes) {
    BoxTreeLevel level;
    level.depth = depth;
    level.dim = dim;
    level.cube_edge = cube_edge;
    level.alpha.assign(dim, 0.0);
    level.boxes = std::move(boxes);
    return level;
}

Box box_at(std::initializer_list<std::uint64_t> cell, std::uint32_t count) {
    Box b;
    std::size_t d = 0;
    for (std::uint64_t c : cell) b.cell[d++] = c;
    b.count = count;
    return b;
}

struct BruteRow {
    std::size_t expanded = 0;
    std::size_t removed = 0;
    std::size_t far = 0;
    std::size_t smooth = 0;
    std::size_t small = 0;
    std::size_t near = 0;
};

// Re-derives the per-depth counters of a self-interaction run (X = Y) by enumerating
// every child pair of every surviving near pair and classifying it from integer cell offsets.
std::vector<BruteRow> brute_accounting(const Points& x, double gamma, double eta, std::size_t rho, std::size_t zeta) {
    const std::size_t dim = x.dim();
    const EnclosingCubes cubes = compute_enclosing_cube(x, x);
    BoxTreeLevel level = root_level(x, cubes.x);
    std::set<std::pair<std::uint32_t, std::uint32_t>> near{{0, 0}};
    std::vector<BruteRow> rows;
    std::size_t max_occupancy = x.size();
    while (!near.empty() && max_occupancy > zeta && level.depth < kMaxDepth) {
        std::vector<std::uint8_t> active(level.boxes.size(), 0);
        for (const auto& [p, q] : near) active[p] = active[q] = 1;
        BoxTreeLevel next = divide_level(level, x, active);
        BruteRow row;
        row.expanded = near.size() << (2 * dim);
        std::set<std::pair<std::uint32_t, std::uint32_t>> next_near;
        std::size_t children = 0;
        const double l = next.edge();
        const bool smooth = static_cast<double>(dim) * l * l / (4.0 * gamma * gamma) <= eta;
        for (std::uint32_t a = 0; a < next.boxes.size(); ++a) {
            for (std::uint32_t b = 0; b < next.boxes.size(); ++b) {
                if (near.count({next.boxes[a].parent, next.boxes[b].parent}) == 0) continue;
                ++children;
                long long cells2 = 0;
                for (std::size_t d = 0; d < dim; ++d) {
                    const long long diff = static_cast<long long>(next.boxes[a].cell[d]) -
                                           static_cast<long long>(next.boxes[b].cell[d]);
                    cells2 += diff * diff;
                }
                if (cells2 >= 4) {
                    ++row.far;
                } else if (smooth) {
                    ++row.smooth;
                } else if (next.boxes[a].count + next.boxes[b].count <= rho) {
                    ++row.small;
                } else {
                    next_near.insert({a, b});
                }
            }
        }
        row.removed = row.expanded - children;
        row.near = next_near.size();
        rows.push_back(row);
        near = std::move(next_near);
        level = std::move(next);
        max_occupancy = 0;
        for (const auto& [p, q] : near) max_occupancy = std::max<std::size_t>(max_occupancy, level.boxes[p].count);
    }
    return rows;
}

}  // namespace

TEST_CASE("resolved defaults") {
    const ResolvedConfig r3 = resolve(F3MConfig{}, 3);
    CHECK(r3.grid_nodes == 64);
    CHECK(r3.rho == 128);
    CHECK(r3.zeta == 64);
    CHECK(r3.threads >= 1);
    const ResolvedConfig r6 = resolve(F3MConfig{}, 6);
    CHECK(r6.grid_nodes == 729);
    CHECK(r6.rho == 1458);
    F3MConfig custom;
    custom.node_budget = 27;
    custom.rho = 5;
    custom.zeta = 9;
    custom.threads = 2;
    const ResolvedConfig rc = resolve(custom, 3);
    CHECK(rc.grid_nodes == 27);
    CHECK(rc.rho == 5);
    CHECK(rc.zeta == 9);
    CHECK(rc.threads == 2);
}

TEST_CASE("config validation") {
    F3MConfig bad;
    bad.eta = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = {};
    bad.zeta = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = {};
    bad.node_budget = 1;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = {};
    bad.node_budget = 5000;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = {};
    bad.threads = -1;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("classify: exactly two edges apart is far") {
    // Depth 2 of a cube of edge 4: l = 1, cells 0 and 2 have centers 0.5 and 2.5.
    const BoxTreeLevel lx = hand_level(2, 1, 4.0, {box_at({0}, 100)});
    const BoxTreeLevel ly = hand_level(2, 1, 4.0, {box_at({1}, 100), box_at({2}, 100)});
    const std::vector<Interaction> pairs{{0, 0}, {0, 1}};
    const FieldPartition part = classify(pairs, lx, ly, gaussian(0.1), 0.5, 10);
    CHECK(part.far == std::vector<Interaction>{{0, 1}});
    CHECK(part.near == std::vector<Interaction>{{0, 0}});
}

TEST_CASE("classify: smoothness bound") {
    // D = 3, l = 0.1, gamma = 1/sqrt(2): bound 3 * 0.01 / (4 * 0.5) = 0.015.
    const BoxTreeLevel lx = hand_level(1, 3, 0.2, {box_at({0, 0, 0}, 500)});
    const BoxTreeLevel ly = hand_level(1, 3, 0.2, {box_at({1, 0, 0}, 500)});
    const std::vector<Interaction> pairs{{0, 0}};
    const KernelSpec k = gaussian(1.0 / std::sqrt(2.0));
    CHECK(classify(pairs, lx, ly, k, 0.1, 10).smooth.size() == 1);
    CHECK(classify(pairs, lx, ly, k, 0.016, 10).smooth.size() == 1);
    CHECK(classify(pairs, lx, ly, k, 0.014, 10).near.size() == 1);
}

TEST_CASE("classify: small field threshold") {
    const BoxTreeLevel lx = hand_level(1, 2, 2.0, {box_at({0, 0}, 3)});
    const BoxTreeLevel ly = hand_level(1, 2, 2.0, {box_at({1, 1}, 3)});
    const std::vector<Interaction> pairs{{0, 0}};
    const KernelSpec k = gaussian(0.05);
    CHECK(classify(pairs, lx, ly, k, 0.5, 12).small.size() == 1);
    CHECK(classify(pairs, lx, ly, k, 0.5, 6).small.size() == 1);
    CHECK(classify(pairs, lx, ly, k, 0.5, 5).near.size() == 1);
}

TEST_CASE("classify: depth mismatch") {
    const BoxTreeLevel lx = hand_level(1, 1, 2.0, {box_at({0}, 3)});
    const BoxTreeLevel ly = hand_level(2, 1, 2.0, {box_at({0}, 3)});
    const std::vector<Interaction> pairs{{0, 0}};
    try {
        (void)classify(pairs, lx, ly, gaussian(1.0), 0.5, 4);
        FAIL("expected invalid state");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidState);
    }
}

TEST_CASE("exact and undivided runs match the oracle") {
    for (std::size_t dim = 1; dim <= kMaxDim; ++dim) {
        const Points x = testing::random_points(150 + 10 * dim, dim, dim);
        const Points y = testing::random_points(120, dim, 100 + dim, -0.5, 1.5);
        const auto b = testing::random_vector(y.size(), 200 + dim);
        const auto ref = testing::reference_product(x, y, b, 0.4);
        F3MConfig exact;
        exact.exact = true;
        const MatvecResult a = f3m_matvec(x, y, b, gaussian(0.4), exact);
        CHECK(testing::rel_l2(a.v, ref) <= 1e-12);
        CHECK(a.stats.final_depth == 0);
        F3MConfig tall;
        tall.zeta = x.size() + y.size();
        const MatvecResult c = f3m_matvec(x, y, b, gaussian(0.4), tall);
        CHECK(testing::rel_l2(c.v, ref) <= 1e-12);
        CHECK(c.stats.depths.size() == 1);
    }
}

TEST_CASE("zero weights give zero and still fill the stats") {
    const Points x = testing::random_points(3000, 2, 1);
    const std::vector<double> b(x.size(), 0.0);
    const MatvecResult r = f3m_matvec(x, x, b, gaussian(0.1), F3MConfig{});
    for (double v : r.v) CHECK(v == 0.0);
    CHECK(r.stats.depths.size() > 1);
    CHECK(r.stats.grid_nodes == 16);
    CHECK(r.stats.cube_edge > 0.0);
}

TEST_CASE("uniform 3-D accuracy at the default settings") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Uniform;
    spec.n = 10000;
    spec.dim = 3;
    spec.seed = 1;
    const Points x = generate(spec);
    const double gamma = solve_gamma_for_ev(x, 1.0);
    const auto b = normal_vector(x.size(), 1, Stream::Weights);
    F3MConfig cfg;
    cfg.node_budget = 64;
    cfg.eta = 0.5;
    const MatvecResult r = f3m_matvec(x, x, b, gaussian(gamma), cfg);
    const ErrorReport err = subset_error(gaussian(gamma), x, x, b, r.v, 5000);
    CHECK(err.subset == 5000);
    CHECK(err.relative_error <= 5e-3);
    (void)account(r.stats, 3);
}

TEST_CASE("unclassified runs stay exact while the tree divides") {
    const Points x = testing::random_points(2000, 2, 5);
    const Points y = testing::random_points(1500, 2, 6);
    const auto b = testing::random_vector(y.size(), 7);
    F3MConfig cfg;
    cfg.classify = false;
    cfg.zeta = 20;
    const MatvecResult r = f3m_matvec(x, y, b, gaussian(0.2), cfg);
    CHECK(r.stats.final_depth >= 2);
    CHECK(testing::rel_l2(r.v, testing::reference_product(x, y, b, 0.2)) <= 1e-12);
    const AccountingReport acc = account(r.stats, 2);
    for (const AccountingRow& row : acc.rows) {
        CHECK(row.m_far == 0);
        CHECK(row.m_smooth == 0);
        CHECK(row.m_small == 0);
        CHECK(row.holds);
    }
}

TEST_CASE("results do not depend on the thread count") {
    const Points x = testing::random_points(20000, 3, 8);
    const auto b = testing::random_vector(x.size(), 9);
    F3MConfig one;
    one.threads = 1;
    F3MConfig many;
    many.threads = 4;
    const auto a = f3m_matvec(x, x, b, gaussian(0.3), one).v;
    const auto c = f3m_matvec(x, x, b, gaussian(0.3), many).v;
    CHECK(a == c);
}

TEST_CASE("operator is reusable and matches one-shot products") {
    DatasetSpec spec;
    spec.kind = DatasetKind::UniformVsNormal;
    spec.n = 4000;
    spec.dim = 2;
    spec.seed = 3;
    const Points x = generate(spec);
    const Points y = generate_sources(spec);
    const KernelSpec k = gaussian(0.5);
    const F3MOperator op(x, y, k, F3MConfig{});
    CHECK(op.rows() == x.size());
    CHECK(op.cols() == y.size());
    for (std::uint64_t seed : {1u, 2u}) {
        const auto b = testing::random_vector(y.size(), seed);
        const auto once = f3m_matvec(x, y, b, k, F3MConfig{}).v;
        CHECK(op.apply(b) == once);
        CHECK(subset_error(k, x, y, b, once, 1000).relative_error <= 5e-3);
    }
    CHECK_THROWS_AS((void)op.apply(std::vector<double>(3, 1.0)), Error);
}

TEST_CASE("shared tree gives the same product as separate copies") {
    const Points x = testing::random_points(5000, 3, 10);
    const Points copy = x;
    const auto b = testing::random_vector(x.size(), 11);
    const auto shared = f3m_matvec(x, x, b, gaussian(0.3), F3MConfig{}).v;
    const auto separate = f3m_matvec(x, copy, b, gaussian(0.3), F3MConfig{}).v;
    CHECK(testing::rel_l2(shared, separate) <= 1e-14);
}

TEST_CASE("sparse grids and single precision stay accurate") {
    const Points x = testing::random_points(6000, 4, 12);
    const double gamma = solve_gamma_for_ev(x, 1.0);
    const auto b = testing::random_vector(x.size(), 13);
    F3MConfig sparse;
    sparse.layout = GridLayout::Sparse;
    const auto vs = f3m_matvec(x, x, b, gaussian(gamma), sparse).v;
    CHECK(subset_error(gaussian(gamma), x, x, b, vs, 2000).relative_error <= 5e-3);
    F3MConfig f32;
    f32.precision = Precision::F32;
    const auto vf = f3m_matvec(x, x, b, gaussian(gamma), f32).v;
    CHECK(subset_error(gaussian(gamma), x, x, b, vf, 2000).relative_error <= 5e-3);
}

TEST_CASE("accounting: root row and brute-force counters on clustered data") {
    DatasetSpec spec;
    spec.kind = DatasetKind::Clustered;
    spec.n = 8000;
    spec.dim = 2;
    spec.seed = 4;
    const Points x = generate(spec);
    const double gamma = 0.05;
    F3MConfig cfg;
    cfg.node_budget = 16;
    const F3MOperator op(x, x, gaussian(gamma), cfg);
    const RunStats& stats = op.stats();
    const AccountingReport acc = account(stats, 2);
    REQUIRE(acc.rows.size() >= 4);
    CHECK(acc.rows[0].expanded == 1);
    CHECK(acc.rows[0].surviving == 1);
    CHECK(acc.rows[0].removed_empty == 0);
    CHECK(acc.rows[0].m_far + acc.rows[0].m_smooth + acc.rows[0].m_small == 0);

    const auto brute = brute_accounting(x, gamma, cfg.eta, stats.rho, stats.zeta);
    REQUIRE(brute.size() + 1 == stats.depths.size());
    for (std::size_t i = 0; i < brute.size(); ++i) {
        const DepthStats& d = stats.depths[i + 1];
        CHECK(d.expanded == brute[i].expanded);
        CHECK(d.removed_empty == brute[i].removed);
        CHECK(d.m_far == brute[i].far);
        CHECK(d.m_smooth == brute[i].smooth);
        CHECK(d.m_small == brute[i].small);
        CHECK(d.m_near == brute[i].near);
        CHECK(acc.rows[i + 1].holds);
        CHECK(acc.rows[i + 1].empty_product == d.empty_x * d.empty_y);
    }
}

TEST_CASE("accounting rejects inconsistent counters") {
    const Points x = testing::random_points(3000, 2, 14);
    const auto r = f3m_matvec(x, x, testing::random_vector(3000, 15), gaussian(0.1), F3MConfig{});
    RunStats broken = r.stats;
    REQUIRE(broken.depths.size() > 1);
    broken.depths[1].m_far += 1;
    try {
        (void)account(broken, 2);
        FAIL("expected internal consistency error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InternalConsistency);
    }
}
