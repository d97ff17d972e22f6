#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "f3m/points.hpp"

namespace f3m {

enum class KernelKind { Gaussian };

/// Storage/arithmetic width used for exact block evaluation. Index math and the
/// oracle are always 64-bit.
enum class Precision { F64, F32 };

struct KernelSpec {
    KernelKind kind = KernelKind::Gaussian;
    double lengthscale = 1.0;

    /// Throws InvalidSpec unless the lengthscale is positive and finite.
    void validate() const;
};

/// Evaluable translation-invariant kernel. Cheap to copy; all members are const.
///
/// Besides pointwise evaluation a kernel exposes its lengthscale (used by the
/// smoothness criterion and the adaptive far-field rule) and, when the kernel
/// factorises over coordinates, a per-axis factor so tensor node grids can be
/// applied dimension by dimension.
class Kernel {
  public:
    explicit Kernel(const KernelSpec& spec);

    [[nodiscard]] const KernelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] double lengthscale() const noexcept { return spec_.lengthscale; }

    /// k as a function of the squared distance.
    [[nodiscard]] double from_squared_distance(double r2) const noexcept {
        return std::exp(-r2 * inv_two_gamma_sq_);
    }
    [[nodiscard]] float from_squared_distance(float r2) const noexcept {
        return std::exp(-r2 * static_cast<float>(inv_two_gamma_sq_));
    }

    /// Unchecked evaluation; x and y must have equal length.
    [[nodiscard]] double operator()(std::span<const double> x, std::span<const double> y) const noexcept {
        double r2 = 0.0;
        for (std::size_t d = 0; d < x.size(); ++d) {
            const double diff = x[d] - y[d];
            r2 += diff * diff;
        }
        return from_squared_distance(r2);
    }

    /// True when k(x, y) = prod_d axis_factor(x_d - y_d).
    [[nodiscard]] bool separable() const noexcept { return spec_.kind == KernelKind::Gaussian; }
    [[nodiscard]] double axis_factor(double diff) const noexcept {
        return std::exp(-diff * diff * inv_two_gamma_sq_);
    }

  private:
    KernelSpec spec_;
    double inv_two_gamma_sq_;
};

/// Checked pointwise evaluation.
[[nodiscard]] double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

/// Exact dense product of one box pair: returns K(X_block, Y_block) * b_block.
[[nodiscard]] std::vector<double> near_field_apply(const KernelSpec& spec, const Points& x_block,
                                                   const Points& y_block, std::span<const double> b_block,
                                                   Precision precision = Precision::F64);

/// Unchecked accumulating form used by the engine: out += K(xs, ys) * b, where xs
/// and ys are contiguous row-major coordinate blocks of width `dim`.
void near_field_accumulate(const Kernel& kernel, std::span<const double> xs, std::span<const double> ys,
                           std::size_t dim, std::span<const double> b, std::span<double> out,
                           Precision precision = Precision::F64) noexcept;

}  // namespace f3m
