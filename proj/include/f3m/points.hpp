#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace f3m {

/// Largest supported point dimension.
inline constexpr std::size_t kMaxDim = 7;

/// Row-major n x D coordinate matrix.
class Points {
  public:
    Points() = default;
    Points(std::size_t rows, std::size_t dim);
    /// Takes ownership of row-major `data`; throws InvalidInput on a size mismatch.
    Points(std::size_t rows, std::size_t dim, std::vector<double> data);

    [[nodiscard]] std::size_t size() const noexcept { return rows_; }
    [[nodiscard]] std::size_t dim() const noexcept { return dim_; }
    [[nodiscard]] bool empty() const noexcept { return rows_ == 0; }

    [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * dim_, dim_};
    }
    [[nodiscard]] std::span<double> row(std::size_t i) noexcept {
        return {data_.data() + i * dim_, dim_};
    }
    [[nodiscard]] double operator()(std::size_t i, std::size_t d) const noexcept {
        return data_[i * dim_ + d];
    }
    [[nodiscard]] double& operator()(std::size_t i, std::size_t d) noexcept {
        return data_[i * dim_ + d];
    }

    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::span<double> data() noexcept { return data_; }

    /// First `m` rows.
    [[nodiscard]] Points head(std::size_t m) const;
    [[nodiscard]] Points select(std::span<const std::size_t> rows) const;

    friend bool operator==(const Points&, const Points&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

/// Throws InvalidInput when any coordinate is NaN or infinite.
void require_finite(const Points& points, const char* what);
void require_finite(std::span<const double> values, const char* what);

}  // namespace f3m
