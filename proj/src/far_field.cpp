#include "f3m/far_field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "f3m/error.hpp"

namespace f3m {

namespace {

// dst[o, i, s] = sum_j a[i, j] src[o, j, s] for one tensor mode; K is the axis length when known.
template <std::size_t K>
void mode_product_fixed(const double* a, std::size_t outer, std::size_t stride, const double* src,
                        double* dst) noexcept {
    for (std::size_t o = 0; o < outer; ++o) {
        const double* s = src + o * K * stride;
        double* t = dst + o * K * stride;
        for (std::size_t k = 0; k < stride; ++k) {
            double column[K];
            for (std::size_t j = 0; j < K; ++j) column[j] = s[j * stride + k];
            for (std::size_t i = 0; i < K; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < K; ++j) acc += a[i * K + j] * column[j];
                t[i * stride + k] = acc;
            }
        }
    }
}

void mode_product(const double* a, std::size_t axis, std::size_t outer, std::size_t stride, const double* src,
                  double* dst) noexcept {
    switch (axis) {
        case 1: mode_product_fixed<1>(a, outer, stride, src, dst); return;
        case 2: mode_product_fixed<2>(a, outer, stride, src, dst); return;
        case 3: mode_product_fixed<3>(a, outer, stride, src, dst); return;
        case 4: mode_product_fixed<4>(a, outer, stride, src, dst); return;
        case 5: mode_product_fixed<5>(a, outer, stride, src, dst); return;
        case 6: mode_product_fixed<6>(a, outer, stride, src, dst); return;
        case 7: mode_product_fixed<7>(a, outer, stride, src, dst); return;
        case 8: mode_product_fixed<8>(a, outer, stride, src, dst); return;
        default: break;
    }
    for (std::size_t o = 0; o < outer; ++o) {
        const double* s = src + o * axis * stride;
        double* t = dst + o * axis * stride;
        for (std::size_t i = 0; i < axis; ++i) {
            for (std::size_t k = 0; k < stride; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < axis; ++j) acc += a[i * axis + j] * s[j * stride + k];
                t[i * stride + k] = acc;
            }
        }
    }
}

}  // namespace

void source_moments(const NodeGrid& grid, std::span<const double> center, double edge,
                    std::span<const double> coords, std::span<const double> b, std::span<double> moment,
                    std::span<double> scratch) noexcept {
    const std::size_t dim = grid.dim();
    const std::size_t m = grid.size();
    double* basis = scratch.data();
    double* t = basis + m;
    std::span<double> inner(t + dim, grid.scratch_size());
    const std::size_t count = b.size();
    for (std::size_t j = 0; j < count; ++j) {
        const double bj = b[j];
        if (bj == 0.0) continue;
        to_reference(coords.subspan(j * dim, dim), center, edge, {t, dim});
        grid.evaluate({t, dim}, {basis, m}, inner);
        for (std::size_t k = 0; k < m; ++k) moment[k] += basis[k] * bj;
    }
}

void target_evaluate(const NodeGrid& grid, std::span<const double> center, double edge,
                     std::span<const double> coords, std::span<const double> local, std::span<double> out,
                     std::span<double> scratch) noexcept {
    const std::size_t dim = grid.dim();
    const std::size_t m = grid.size();
    double* basis = scratch.data();
    double* t = basis + m;
    std::span<double> inner(t + dim, grid.scratch_size());
    const std::size_t count = coords.size() / dim;
    for (std::size_t i = 0; i < count; ++i) {
        to_reference(coords.subspan(i * dim, dim), center, edge, {t, dim});
        grid.evaluate({t, dim}, {basis, m}, inner);
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) acc += basis[k] * local[k];
        out[i] += acc;
    }
}

NodeKernel::NodeKernel(const Kernel& kernel, const NodeGrid& grid, double edge, std::span<const double> delta,
                       bool allow_dense)
    : dim_(grid.dim()), size_(grid.size()), axis_(0), storage_(Storage::Dense) {
    const double half = 0.5 * edge;
    if (kernel.separable() && grid.layout() == GridLayout::FullTensor) {
        storage_ = Storage::Kronecker;
        const auto nodes = grid.axis_basis().nodes();
        axis_ = nodes.size();
        data_.resize(dim_ * axis_ * axis_);
        for (std::size_t d = 0; d < dim_; ++d) {
            double* block = data_.data() + d * axis_ * axis_;
            for (std::size_t i = 0; i < axis_; ++i) {
                for (std::size_t j = 0; j < axis_; ++j) {
                    block[i * axis_ + j] = kernel.axis_factor(delta[d] + half * (nodes[i] - nodes[j]));
                }
            }
        }
        return;
    }
    const Points& nodes = grid.nodes();
    if (kernel.separable() && !allow_dense) {
        storage_ = Storage::Product;
        std::vector<double> coords(nodes.data().begin(), nodes.data().end());
        std::sort(coords.begin(), coords.end());
        coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
        axis_ = coords.size();
        coord_index_.resize(size_ * dim_);
        for (std::size_t k = 0; k < size_ * dim_; ++k) {
            const auto it = std::lower_bound(coords.begin(), coords.end(), nodes.data()[k]);
            coord_index_[k] = static_cast<std::uint16_t>(it - coords.begin());
        }
        data_.resize(dim_ * axis_ * axis_);
        for (std::size_t d = 0; d < dim_; ++d) {
            double* block = data_.data() + d * axis_ * axis_;
            for (std::size_t i = 0; i < axis_; ++i) {
                for (std::size_t j = 0; j < axis_; ++j) {
                    block[i * axis_ + j] = kernel.axis_factor(delta[d] + half * (coords[i] - coords[j]));
                }
            }
        }
        return;
    }
    data_.resize(size_ * size_);
    for (std::size_t i = 0; i < size_; ++i) {
        for (std::size_t j = 0; j < size_; ++j) {
            double r2 = 0.0;
            for (std::size_t d = 0; d < dim_; ++d) {
                const double diff = delta[d] + half * (nodes(i, d) - nodes(j, d));
                r2 += diff * diff;
            }
            data_[i * size_ + j] = kernel.from_squared_distance(r2);
        }
    }
}

void NodeKernel::apply(std::span<const double> in, std::span<double> out, std::span<double> work) const noexcept {
    if (storage_ == Storage::Dense) {
        for (std::size_t i = 0; i < size_; ++i) {
            const double* row = data_.data() + i * size_;
            double acc = 0.0;
            for (std::size_t j = 0; j < size_; ++j) acc += row[j] * in[j];
            out[i] += acc;
        }
        return;
    }
    if (storage_ == Storage::Product) {
        std::array<const double*, kMaxDim> rows{};
        for (std::size_t i = 0; i < size_; ++i) {
            for (std::size_t d = 0; d < dim_; ++d) {
                rows[d] = data_.data() + (d * axis_ + coord_index_[i * dim_ + d]) * axis_;
            }
            double acc = 0.0;
            for (std::size_t j = 0; j < size_; ++j) {
                const std::uint16_t* cj = coord_index_.data() + j * dim_;
                double entry = in[j];
                for (std::size_t d = 0; d < dim_; ++d) entry *= rows[d][cj[d]];
                acc += entry;
            }
            out[i] += acc;
        }
        return;
    }
    const double* src = in.data();
    double* bufs[2] = {work.data(), work.data() + size_};
    std::size_t stride = size_;
    for (std::size_t d = 0; d < dim_; ++d) {
        stride /= axis_;
        double* dst = bufs[d % 2];
        mode_product(data_.data() + d * axis_ * axis_, axis_, size_ / (stride * axis_), stride, src, dst);
        src = dst;
    }
    for (std::size_t i = 0; i < size_; ++i) out[i] += src[i];
}

std::vector<double> far_field_apply(const KernelSpec& spec, const BoxRef& box_x, const BoxRef& box_y,
                                    std::span<const double> b_block, const NodeGrid& grid) {
    const Kernel kernel(spec);
    const std::size_t dim = grid.dim();
    if (!(box_x.edge > 0.0) || !(box_y.edge > 0.0) || !std::isfinite(box_x.edge) || !std::isfinite(box_y.edge)) {
        fail(ErrorKind::DegenerateBox, "far-field boxes need a positive finite edge");
    }
    if (box_x.edge != box_y.edge) fail(ErrorKind::InvalidInput, "far-field boxes must share one edge length");
    if (box_x.center.size() != dim || box_y.center.size() != dim) {
        fail(ErrorKind::InvalidInput, "box centers do not match the grid dimension " + std::to_string(dim));
    }
    if (box_x.coords.size() % dim != 0 || box_y.coords.size() != b_block.size() * dim) {
        fail(ErrorKind::InvalidInput, "box coordinates and weights have inconsistent shapes");
    }

    const std::size_t m = grid.size();
    std::vector<double> scratch(m + dim + grid.scratch_size());
    std::vector<double> moment(m, 0.0);
    source_moments(grid, box_y.center, box_y.edge, box_y.coords, b_block, moment, scratch);

    std::vector<double> delta(dim);
    for (std::size_t d = 0; d < dim; ++d) delta[d] = box_x.center[d] - box_y.center[d];
    const NodeKernel node_kernel(kernel, grid, box_x.edge, delta);
    std::vector<double> local(m, 0.0);
    std::vector<double> work(node_kernel.work_size());
    node_kernel.apply(moment, local, work);

    std::vector<double> out(box_x.coords.size() / dim, 0.0);
    target_evaluate(grid, box_x.center, box_x.edge, box_x.coords, local, out, scratch);
    return out;
}

}  // namespace f3m
