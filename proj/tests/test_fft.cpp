#include <catch2/catch_amalgamated.hpp>

#include "diffrecon/fft.hpp"
#include "diffrecon/random.hpp"

using namespace diffrecon;

namespace {

ComplexImage random_complex(RandomSource& rng, int h, int w) {
    ComplexImage img(h, w);
    for (auto& v : img.data) v = {rng.normal(), rng.normal()};
    return img;
}

}  // namespace

TEST_CASE("constant image transforms to a single centered entry") {
    const int n = 8;
    const double c = 0.7;
    const ComplexImage x(n, n, {c, 0.0});
    const ComplexImage k = dft2_centered(x);
    for (int y = 0; y < n; ++y)
        for (int xx = 0; xx < n; ++xx) {
            if (y == n / 2 && xx == n / 2) {
                REQUIRE_THAT(k.at(y, xx).real(), Catch::Matchers::WithinAbs(c * n, 1e-12));
                REQUIRE_THAT(k.at(y, xx).imag(), Catch::Matchers::WithinAbs(0.0, 1e-12));
            } else {
                REQUIRE(std::abs(k.at(y, xx)) < 1e-12);
            }
        }
}

TEST_CASE("centered unit impulse transforms to the constant 1/N") {
    const int n = 16;
    ComplexImage x(n, n);
    x.at(n / 2, n / 2) = {1.0, 0.0};
    const ComplexImage k = dft2_centered(x);
    for (const auto& v : k.data) {
        REQUIRE_THAT(v.real(), Catch::Matchers::WithinAbs(1.0 / n, 1e-12));
        REQUIRE_THAT(v.imag(), Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("Parseval: transform preserves the L2 norm") {
    RandomSource rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const ComplexImage x = random_complex(rng, 8, 8);
        REQUIRE_THAT(l2_norm(dft2_centered(x)), Catch::Matchers::WithinAbs(l2_norm(x), 1e-10));
        REQUIRE_THAT(l2_norm(idft2_centered(x)), Catch::Matchers::WithinAbs(l2_norm(x), 1e-10));
    }
}

TEST_CASE("round trip recovers the input elementwise") {
    RandomSource rng(12);
    const ComplexImage x = random_complex(rng, 16, 16);
    const ComplexImage back = idft2_centered(dft2_centered(x));
    for (std::size_t i = 0; i < x.data.size(); ++i)
        REQUIRE(std::abs(back.data[i] - x.data[i]) < 1e-10);
}

TEST_CASE("transform works on non-power-of-two and non-square grids") {
    RandomSource rng(13);
    for (const auto [h, w] : {std::pair{12, 20}, std::pair{7, 9}, std::pair{15, 16}, std::pair{1, 5}}) {
        const ComplexImage x = random_complex(rng, h, w);
        const ComplexImage k = dft2_centered(x);
        REQUIRE_THAT(l2_norm(k), Catch::Matchers::WithinAbs(l2_norm(x), 1e-10));
        const ComplexImage back = idft2_centered(k);
        for (std::size_t i = 0; i < x.data.size(); ++i)
            REQUIRE(std::abs(back.data[i] - x.data[i]) < 1e-10);
    }
}

TEST_CASE("inverse of the single centered entry is the constant image") {
    const int n = 8;
    ComplexImage k(n, n);
    k.at(n / 2, n / 2) = {0.3 * n, 0.0};
    const ComplexImage x = idft2_centered(k);
    for (const auto& v : x.data) REQUIRE(std::abs(v - std::complex<double>(0.3, 0.0)) < 1e-12);
}

TEST_CASE("transform is linear") {
    RandomSource rng(14);
    const ComplexImage x = random_complex(rng, 10, 10);
    const ComplexImage y = random_complex(rng, 10, 10);
    const std::complex<double> a{1.7, -0.3}, b{-0.4, 2.1};
    ComplexImage combo(10, 10);
    for (std::size_t i = 0; i < combo.data.size(); ++i)
        combo.data[i] = a * x.data[i] + b * y.data[i];
    const ComplexImage lhs = dft2_centered(combo);
    const ComplexImage kx = dft2_centered(x);
    const ComplexImage ky = dft2_centered(y);
    for (std::size_t i = 0; i < lhs.data.size(); ++i)
        REQUIRE(std::abs(lhs.data[i] - (a * kx.data[i] + b * ky.data[i])) < 1e-10);
}

TEST_CASE("non-finite input is rejected") {
    ComplexImage x(4, 4);
    x.at(1, 2) = {std::numeric_limits<double>::quiet_NaN(), 0.0};
    REQUIRE_THROWS_AS(dft2_centered(x), std::invalid_argument);
    x.at(1, 2) = {0.0, std::numeric_limits<double>::infinity()};
    REQUIRE_THROWS_AS(idft2_centered(x), std::invalid_argument);
}
