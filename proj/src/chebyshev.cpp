#include "f3m/chebyshev.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "f3m/error.hpp"

namespace f3m {

namespace {

double chebyshev_node(int i, int degree) {
    return std::sin(std::numbers::pi * static_cast<double>(degree - 2 * i) / static_cast<double>(2 * degree));
}

void require_degree(int degree) {
    if (degree < 1) fail(ErrorKind::InvalidDegree, "Chebyshev degree must be >= 1, got " + std::to_string(degree));
}

void require_dim(std::size_t dim) {
    if (dim < 1 || dim > kMaxDim) {
        fail(ErrorKind::InvalidInput, "grid dimension must be in [1, 7], got " + std::to_string(dim));
    }
}

// Writes the tensor product of per-axis values into out, last axis fastest.
// axis_values[d] points at `sizes[d]` doubles.
void tensor_product(std::size_t dim, const double* const* axis_values, const std::size_t* sizes,
                    double* out) noexcept {
    std::size_t len = 1;
    out[0] = 1.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const std::size_t width = sizes[d];
        const double* values = axis_values[d];
        for (std::size_t k = len; k-- > 0;) {
            const double head = out[k];
            double* dst = out + k * width;
            for (std::size_t i = width; i-- > 0;) dst[i] = head * values[i];
        }
        len *= width;
    }
}

int level_degree(int level) { return level == 0 ? 0 : (1 << level); }

void enumerate_multi_indices(std::size_t dim, int max_sum, std::vector<std::array<int, kMaxDim>>& out) {
    std::array<int, kMaxDim> current{};
    auto recurse = [&](auto&& self, std::size_t d, int remaining) -> void {
        if (d == dim) {
            out.push_back(current);
            return;
        }
        for (int j = 0; j <= remaining; ++j) {
            current[d] = j;
            self(self, d + 1, remaining - j);
        }
        current[d] = 0;
    };
    recurse(recurse, 0, max_sum);
}

double binomial(int n, int k) {
    double result = 1.0;
    for (int i = 1; i <= k; ++i) result = result * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(result);
}

}  // namespace

std::size_t saturating_pow(std::size_t base, std::size_t exponent, std::size_t limit) {
    std::size_t result = 1;
    for (std::size_t e = 0; e < exponent; ++e) {
        if (base != 0 && result > limit / base) return limit;
        result *= base;
    }
    return std::min(result, limit);
}

std::vector<double> chebyshev_nodes(int degree) {
    require_degree(degree);
    std::vector<double> nodes(static_cast<std::size_t>(degree) + 1);
    for (int i = 0; i <= degree; ++i) nodes[static_cast<std::size_t>(i)] = chebyshev_node(i, degree);
    return nodes;
}

std::vector<double> barycentric_weights(int degree) {
    require_degree(degree);
    std::vector<double> weights(static_cast<std::size_t>(degree) + 1);
    for (int i = 0; i <= degree; ++i) {
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        const double delta = (i == 0 || i == degree) ? 0.5 : 1.0;
        weights[static_cast<std::size_t>(i)] = sign * delta;
    }
    return weights;
}

ChebyshevBasis1D::ChebyshevBasis1D(int degree) : degree_(degree) {
    if (degree < 0) fail(ErrorKind::InvalidDegree, "basis degree must be >= 0");
    if (degree == 0) {
        nodes_ = {0.0};
        weights_ = {1.0};
    } else {
        nodes_ = chebyshev_nodes(degree);
        weights_ = barycentric_weights(degree);
    }
}

void ChebyshevBasis1D::evaluate(double t, std::span<double> out) const noexcept {
    const std::size_t m = nodes_.size();
    if (m == 1) {
        out[0] = 1.0;
        return;
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double diff = t - nodes_[i];
        if (diff == 0.0) {
            std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(m), 0.0);
            out[i] = 1.0;
            return;
        }
        out[i] = weights_[i] / diff;
        denom += out[i];
    }
    const double inv = 1.0 / denom;
    for (std::size_t i = 0; i < m; ++i) out[i] *= inv;
}

std::vector<double> eval_basis(double t, const ChebyshevBasis1D& basis) {
    std::vector<double> out(basis.size());
    basis.evaluate(t, out);
    return out;
}

NodeGrid NodeGrid::full_tensor(std::size_t dim, int degree, std::size_t cap) {
    require_dim(dim);
    if (degree < 0) fail(ErrorKind::InvalidDegree, "grid degree must be >= 0");
    const std::size_t per_axis = static_cast<std::size_t>(degree) + 1;
    const std::size_t total = saturating_pow(per_axis, dim, cap + 1);
    if (total > cap) {
        fail(ErrorKind::GridTooLarge, std::to_string(per_axis) + "^" + std::to_string(dim) +
                                          " nodes exceeds the cap of " + std::to_string(cap));
    }
    NodeGrid grid;
    grid.dim_ = dim;
    grid.layout_ = GridLayout::FullTensor;
    grid.parameter_ = degree;
    grid.bases_.emplace_back(degree);
    const auto axis = grid.bases_.front().nodes();
    grid.nodes_ = Points(total, dim);
    for (std::size_t k = 0; k < total; ++k) {
        std::size_t rest = k;
        for (std::size_t d = dim; d-- > 0;) {
            grid.nodes_(k, d) = axis[rest % per_axis];
            rest /= per_axis;
        }
    }
    grid.scratch_size_ = dim * per_axis;
    return grid;
}

std::size_t NodeGrid::sparse_size(std::size_t dim, int level) {
    require_dim(dim);
    std::vector<std::array<int, kMaxDim>> indices;
    enumerate_multi_indices(dim, level, indices);
    std::size_t total = 0;
    for (const auto& j : indices) {
        std::size_t count = 1;
        for (std::size_t d = 0; d < dim; ++d) {
            const int jd = j[d];
            count *= (jd == 0) ? 1 : (jd == 1 ? 2 : (std::size_t{1} << (jd - 1)));
        }
        total += count;
    }
    return total;
}

NodeGrid NodeGrid::sparse(std::size_t dim, int level, std::size_t cap) {
    require_dim(dim);
    if (level < 1) fail(ErrorKind::InvalidDegree, "sparse grid level must be >= 1");
    if (level > 20 || sparse_size(dim, level) > cap) {
        fail(ErrorKind::GridTooLarge, "sparse grid of level " + std::to_string(level) + " in dimension " +
                                          std::to_string(dim) + " exceeds the cap of " + std::to_string(cap));
    }

    NodeGrid grid;
    grid.dim_ = dim;
    grid.layout_ = GridLayout::Sparse;
    grid.parameter_ = level;
    std::size_t per_axis_values = 0;
    for (int j = 0; j <= level; ++j) {
        grid.bases_.emplace_back(level_degree(j));
        grid.basis_offsets_.push_back(per_axis_values);
        per_axis_values += grid.bases_.back().size();
    }

    std::vector<std::array<int, kMaxDim>> indices;
    enumerate_multi_indices(dim, level, indices);
    const int min_sum = std::max(0, level - static_cast<int>(dim) + 1);
    const std::uint32_t finest = 1u << level;

    // Nodes are keyed by their index on the finest 1-D level; nesting makes the key unique.
    using Key = std::array<std::uint32_t, kMaxDim>;
    auto axis_key = [&](int axis_level, std::size_t i) -> std::uint32_t {
        if (axis_level == 0) return finest / 2;
        return static_cast<std::uint32_t>(i) << (level - axis_level);
    };

    std::vector<std::vector<Key>> term_keys;
    std::vector<Key> all_keys;
    std::size_t max_term = 0;
    for (const auto& j : indices) {
        int sum = 0;
        for (std::size_t d = 0; d < dim; ++d) sum += j[d];
        if (sum < min_sum) continue;
        Term term;
        term.levels = j;
        const int gap = level - sum;
        term.coefficient = ((gap % 2 == 0) ? 1.0 : -1.0) * binomial(static_cast<int>(dim) - 1, gap);

        std::size_t count = 1;
        std::array<std::size_t, kMaxDim> sizes{};
        for (std::size_t d = 0; d < dim; ++d) {
            sizes[d] = grid.bases_[static_cast<std::size_t>(j[d])].size();
            count *= sizes[d];
        }
        max_term = std::max(max_term, count);
        std::vector<Key> keys(count);
        for (std::size_t k = 0; k < count; ++k) {
            Key key{};
            std::size_t rest = k;
            for (std::size_t d = dim; d-- > 0;) {
                key[d] = axis_key(j[d], rest % sizes[d]);
                rest /= sizes[d];
            }
            keys[k] = key;
        }
        all_keys.insert(all_keys.end(), keys.begin(), keys.end());
        term_keys.push_back(std::move(keys));
        grid.terms_.push_back(std::move(term));
    }
    std::sort(all_keys.begin(), all_keys.end());
    all_keys.erase(std::unique(all_keys.begin(), all_keys.end()), all_keys.end());

    for (std::size_t t = 0; t < grid.terms_.size(); ++t) {
        auto& ids = grid.terms_[t].node_ids;
        ids.reserve(term_keys[t].size());
        for (const Key& key : term_keys[t]) {
            const auto it = std::lower_bound(all_keys.begin(), all_keys.end(), key);
            ids.push_back(static_cast<std::uint32_t>(it - all_keys.begin()));
        }
    }

    grid.nodes_ = Points(all_keys.size(), dim);
    for (std::size_t k = 0; k < all_keys.size(); ++k) {
        for (std::size_t d = 0; d < dim; ++d) {
            grid.nodes_(k, d) = chebyshev_node(static_cast<int>(all_keys[k][d]), static_cast<int>(finest));
        }
    }
    grid.scratch_size_ = dim * per_axis_values + max_term;
    return grid;
}

NodeGrid NodeGrid::for_budget(std::size_t dim, GridLayout layout, std::size_t budget, std::size_t cap) {
    require_dim(dim);
    const std::size_t target = std::max<std::size_t>(1, std::min(budget, cap));
    if (layout == GridLayout::FullTensor) {
        std::size_t per_axis = 1;
        while (saturating_pow(per_axis + 1, dim, target + 1) <= target) ++per_axis;
        return full_tensor(dim, static_cast<int>(per_axis) - 1, cap);
    }
    int level = 1;
    if (sparse_size(dim, level) > cap) return sparse(dim, level, cap);  // throws GridTooLarge
    while (sparse_size(dim, level) < budget && level < 20 && sparse_size(dim, level + 1) <= cap) ++level;
    return sparse(dim, level, cap);
}

void NodeGrid::evaluate(std::span<const double> t, std::span<double> out, std::span<double> scratch) const noexcept {
    std::array<const double*, kMaxDim> axis_values{};
    std::array<std::size_t, kMaxDim> sizes{};
    if (layout_ == GridLayout::FullTensor) {
        const ChebyshevBasis1D& basis = bases_.front();
        const std::size_t width = basis.size();
        for (std::size_t d = 0; d < dim_; ++d) {
            double* values = scratch.data() + d * width;
            basis.evaluate(t[d], {values, width});
            axis_values[d] = values;
            sizes[d] = width;
        }
        tensor_product(dim_, axis_values.data(), sizes.data(), out.data());
        return;
    }

    const std::size_t per_axis = basis_offsets_.back() + bases_.back().size();
    for (std::size_t d = 0; d < dim_; ++d) {
        for (std::size_t j = 0; j < bases_.size(); ++j) {
            bases_[j].evaluate(t[d], {scratch.data() + d * per_axis + basis_offsets_[j], bases_[j].size()});
        }
    }
    double* term_values = scratch.data() + dim_ * per_axis;
    std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(size()), 0.0);
    for (const Term& term : terms_) {
        for (std::size_t d = 0; d < dim_; ++d) {
            const auto j = static_cast<std::size_t>(term.levels[d]);
            axis_values[d] = scratch.data() + d * per_axis + basis_offsets_[j];
            sizes[d] = bases_[j].size();
        }
        tensor_product(dim_, axis_values.data(), sizes.data(), term_values);
        for (std::size_t k = 0; k < term.node_ids.size(); ++k) {
            out[term.node_ids[k]] += term.coefficient * term_values[k];
        }
    }
}

std::vector<double> NodeGrid::evaluate(std::span<const double> t) const {
    if (t.size() != dim_) fail(ErrorKind::InvalidInput, "reference point dimension does not match the grid");
    std::vector<double> out(size());
    std::vector<double> scratch(scratch_size_);
    evaluate(t, out, scratch);
    return out;
}

NodeGrid build_grid(std::size_t dim, GridLayout layout, int parameter, std::size_t cap) {
    if (layout == GridLayout::FullTensor) {
        if (parameter < 1) fail(ErrorKind::InvalidDegree, "full tensor grids need degree >= 1");
        return NodeGrid::full_tensor(dim, parameter, cap);
    }
    return NodeGrid::sparse(dim, parameter, cap);
}

FarFieldBranch far_field_branch(double edge, double lengthscale) {
    if (!(edge >= 0.0) || !(lengthscale > 0.0)) {
        fail(ErrorKind::InvalidInput, "adaptive rule needs edge >= 0 and lengthscale > 0");
    }
    const double q = edge * edge / (2.0 * lengthscale * lengthscale);
    if (q <= 0.01) return FarFieldBranch::Coarse;
    if (q <= 5.0) return FarFieldBranch::Full;
    return FarFieldBranch::Skip;
}

std::size_t adaptive_node_count(double edge, double lengthscale, std::size_t requested, std::size_t dim) {
    switch (far_field_branch(edge, lengthscale)) {
        case FarFieldBranch::Coarse: return std::min(requested, saturating_pow(3, dim, requested + 1));
        case FarFieldBranch::Full: return requested;
        case FarFieldBranch::Skip: return 0;
    }
    return requested;
}

}  // namespace f3m
