#include <doctest.h>

#include <cmath>
#include <vector>

#include "f3m/error.hpp"
#include "f3m/kernel.hpp"
#include "support.hpp"

using namespace f3m;

namespace {

KernelSpec gaussian(double gamma) { return {KernelKind::Gaussian, gamma}; }

}  // namespace

TEST_CASE("kernel_eval at coincident points is one") {
    for (std::size_t dim = 1; dim <= kMaxDim; ++dim) {
        std::vector<double> x(dim, 0.37);
        CHECK(kernel_eval(gaussian(1.0), x, x) == 1.0);
    }
}

TEST_CASE("kernel_eval closed forms") {
    const std::vector<double> a{0.0};
    const std::vector<double> b{1.0};
    CHECK(kernel_eval(gaussian(1.0 / std::sqrt(2.0)), a, b) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(kernel_eval(gaussian(1.0 / std::sqrt(2.0)), a, b) == doctest::Approx(0.367879).epsilon(1e-6));

    const std::vector<double> x{0.0, 0.0, 0.0};
    const std::vector<double> y{1.0, 2.0, 2.0};
    CHECK(kernel_eval(gaussian(3.0), x, y) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
}

TEST_CASE("kernel_eval rejects bad input") {
    const std::vector<double> x{0.0, 1.0};
    const std::vector<double> bad{std::nan(""), 1.0};
    const std::vector<double> inf{INFINITY, 1.0};
    CHECK_THROWS_AS(kernel_eval(gaussian(1.0), x, bad), Error);
    CHECK_THROWS_AS(kernel_eval(gaussian(1.0), inf, x), Error);
    try {
        (void)kernel_eval(gaussian(0.0), x, x);
        FAIL("expected invalid spec");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidSpec);
    }
    try {
        (void)kernel_eval(gaussian(-2.0), x, x);
        FAIL("expected invalid spec");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidSpec);
    }
}

TEST_CASE("near_field_apply with zero weights is zero") {
    const Points x = testing::random_points(6, 2, 1);
    const Points y = testing::random_points(5, 2, 2);
    const std::vector<double> b(5, 0.0);
    for (double v : near_field_apply(gaussian(0.5), x, y, b)) CHECK(v == 0.0);
}

TEST_CASE("near_field_apply single coincident pair returns the weight") {
    const Points x(1, 3, {0.1, 0.2, 0.3});
    const std::vector<double> b{5.0};
    const auto v = near_field_apply(gaussian(1.0), x, x, b);
    REQUIRE(v.size() == 1);
    CHECK(v[0] == 5.0);
}

TEST_CASE("near_field_apply matches an extended precision double loop") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Points x = testing::random_points(8, 3, 10 + seed);
        const Points y = testing::random_points(8, 3, 20 + seed);
        const auto b = testing::random_vector(8, 30 + seed);
        const double gamma = 0.3 + 0.2 * static_cast<double>(seed);
        const auto v = near_field_apply(gaussian(gamma), x, y, b);
        const auto ref = testing::reference_product(x, y, b, gamma);
        CHECK(testing::rel_l2(v, ref) <= 1e-14);
    }
}

TEST_CASE("near_field_apply in single precision stays close") {
    const Points x = testing::random_points(40, 3, 3);
    const Points y = testing::random_points(50, 3, 4);
    const auto b = testing::random_vector(50, 5);
    const auto v = near_field_apply(gaussian(0.4), x, y, b, Precision::F32);
    const auto ref = testing::reference_product(x, y, b, 0.4);
    CHECK(testing::rel_l2(v, ref) <= 1e-5);
}

TEST_CASE("near_field_apply rejects mismatched shapes") {
    const Points x = testing::random_points(4, 2, 1);
    const Points y3 = testing::random_points(4, 3, 2);
    const Points y2 = testing::random_points(4, 2, 3);
    const std::vector<double> b4(4, 1.0);
    const std::vector<double> b3(3, 1.0);
    CHECK_THROWS_AS(near_field_apply(gaussian(1.0), x, y3, b4), Error);
    CHECK_THROWS_AS(near_field_apply(gaussian(1.0), x, y2, b3), Error);
}

TEST_CASE("Gaussian kernel factorises over axes") {
    const Kernel k(gaussian(0.7));
    REQUIRE(k.separable());
    const std::vector<double> x{0.1, -0.4, 0.9};
    const std::vector<double> y{0.5, 0.3, -0.2};
    double prod = 1.0;
    for (std::size_t d = 0; d < 3; ++d) prod *= k.axis_factor(x[d] - y[d]);
    CHECK(prod == doctest::Approx(k(x, y)).epsilon(1e-14));
}
