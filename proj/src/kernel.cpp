#include "f3m/kernel.hpp"

#include <string>

#include "f3m/error.hpp"

namespace f3m {

void KernelSpec::validate() const {
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
        fail(ErrorKind::InvalidSpec, "kernel lengthscale must be positive and finite, got " + std::to_string(lengthscale));
    }
}

Kernel::Kernel(const KernelSpec& spec) : spec_(spec) {
    spec_.validate();
    inv_two_gamma_sq_ = 1.0 / (2.0 * spec_.lengthscale * spec_.lengthscale);
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
    const Kernel kernel(spec);
    if (x.size() != y.size() || x.empty()) {
        fail(ErrorKind::InvalidInput, "kernel arguments must share a dimension >= 1");
    }
    require_finite(x, "x");
    require_finite(y, "y");
    return kernel(x, y);
}

namespace {

// One accumulator per output row, plain left-to-right summation.
template <typename Real, std::size_t Dim>
void accumulate_fixed(const Kernel& kernel, const double* xs, std::size_t nx, const double* ys, std::size_t ny,
                      const double* b, double* out) noexcept {
    for (std::size_t i = 0; i < nx; ++i) {
        const double* xi = xs + i * Dim;
        Real xr[Dim];
        for (std::size_t d = 0; d < Dim; ++d) xr[d] = static_cast<Real>(xi[d]);
        Real acc = 0;
        for (std::size_t j = 0; j < ny; ++j) {
            const double* yj = ys + j * Dim;
            Real r2 = 0;
            for (std::size_t d = 0; d < Dim; ++d) {
                const Real diff = xr[d] - static_cast<Real>(yj[d]);
                r2 += diff * diff;
            }
            acc += kernel.from_squared_distance(r2) * static_cast<Real>(b[j]);
        }
        out[i] += static_cast<double>(acc);
    }
}

template <typename Real>
void accumulate_dispatch(const Kernel& kernel, const double* xs, std::size_t nx, const double* ys, std::size_t ny,
                         std::size_t dim, const double* b, double* out) noexcept {
    switch (dim) {
        case 1: accumulate_fixed<Real, 1>(kernel, xs, nx, ys, ny, b, out); return;
        case 2: accumulate_fixed<Real, 2>(kernel, xs, nx, ys, ny, b, out); return;
        case 3: accumulate_fixed<Real, 3>(kernel, xs, nx, ys, ny, b, out); return;
        case 4: accumulate_fixed<Real, 4>(kernel, xs, nx, ys, ny, b, out); return;
        case 5: accumulate_fixed<Real, 5>(kernel, xs, nx, ys, ny, b, out); return;
        case 6: accumulate_fixed<Real, 6>(kernel, xs, nx, ys, ny, b, out); return;
        case 7: accumulate_fixed<Real, 7>(kernel, xs, nx, ys, ny, b, out); return;
        default: break;
    }
    for (std::size_t i = 0; i < nx; ++i) {
        Real acc = 0;
        for (std::size_t j = 0; j < ny; ++j) {
            Real r2 = 0;
            for (std::size_t d = 0; d < dim; ++d) {
                const Real diff = static_cast<Real>(xs[i * dim + d]) - static_cast<Real>(ys[j * dim + d]);
                r2 += diff * diff;
            }
            acc += kernel.from_squared_distance(r2) * static_cast<Real>(b[j]);
        }
        out[i] += static_cast<double>(acc);
    }
}

}  // namespace

void near_field_accumulate(const Kernel& kernel, std::span<const double> xs, std::span<const double> ys,
                           std::size_t dim, std::span<const double> b, std::span<double> out,
                           Precision precision) noexcept {
    const std::size_t nx = xs.size() / dim;
    const std::size_t ny = ys.size() / dim;
    if (precision == Precision::F32) {
        accumulate_dispatch<float>(kernel, xs.data(), nx, ys.data(), ny, dim, b.data(), out.data());
    } else {
        accumulate_dispatch<double>(kernel, xs.data(), nx, ys.data(), ny, dim, b.data(), out.data());
    }
}

std::vector<double> near_field_apply(const KernelSpec& spec, const Points& x_block, const Points& y_block,
                                     std::span<const double> b_block, Precision precision) {
    const Kernel kernel(spec);
    if (x_block.empty() || y_block.empty()) fail(ErrorKind::InvalidInput, "near-field blocks must be non-empty");
    if (x_block.dim() != y_block.dim()) {
        fail(ErrorKind::InvalidInput, "block dimensions differ: " + std::to_string(x_block.dim()) + " vs " +
                                          std::to_string(y_block.dim()));
    }
    if (b_block.size() != y_block.size()) {
        fail(ErrorKind::InvalidInput, "weight vector length " + std::to_string(b_block.size()) +
                                          " does not match " + std::to_string(y_block.size()) + " source points");
    }
    std::vector<double> out(x_block.size(), 0.0);
    near_field_accumulate(kernel, x_block.data(), y_block.data(), x_block.dim(), b_block, out, precision);
    return out;
}

}  // namespace f3m
