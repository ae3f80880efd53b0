#include <catch2/catch_amalgamated.hpp>

#include "diffrecon/metrics.hpp"
#include "diffrecon/random.hpp"

using namespace diffrecon;

TEST_CASE("psnr of identical images is the +inf sentinel") {
    const RealImage a(16, 16, 0.4);
    REQUIRE(std::isinf(psnr(a, a, 1.0)));
    REQUIRE(psnr(a, a, 1.0) > 0.0);
}

TEST_CASE("psnr formula values") {
    const RealImage ref(10, 10, 0.5);
    RealImage test = ref;
    for (double& v : test.data) v += 0.1;  // MSE = 0.01
    REQUIRE_THAT(psnr(ref, test, 1.0), Catch::Matchers::WithinAbs(20.0, 1e-9));

    RealImage test8 = ref;
    for (double& v : test8.data) v += 0.125;  // MSE = 1/64, exactly representable
    REQUIRE_THAT(psnr(ref, test8, 1.0),
                 Catch::Matchers::WithinAbs(10.0 * std::log10(64.0), 1e-12));
}

TEST_CASE("halving the error raises psnr by 20 log10 2") {
    RandomSource rng(1);
    const RealImage ref = gaussian_image(rng, 12, 12);
    const RealImage err = gaussian_image(rng, 12, 12);
    RealImage full = ref, half = ref;
    for (std::size_t i = 0; i < ref.data.size(); ++i) {
        full.data[i] += err.data[i];
        half.data[i] += 0.5 * err.data[i];
    }
    REQUIRE_THAT(psnr(ref, half, 1.0) - psnr(ref, full, 1.0),
                 Catch::Matchers::WithinAbs(20.0 * std::log10(2.0), 1e-9));
}

TEST_CASE("psnr is strictly decreasing in MSE") {
    const RealImage ref(8, 8, 0.0);
    double last = std::numeric_limits<double>::infinity();
    for (double e = 0.01; e < 0.5; e += 0.05) {
        const RealImage test(8, 8, e);
        const double p = psnr(ref, test, 1.0);
        REQUIRE(p < last);
        last = p;
    }
}

TEST_CASE("psnr validates its inputs") {
    const RealImage a(8, 8, 0.0), b(8, 9, 0.0);
    REQUIRE_THROWS_AS(psnr(a, b, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(psnr(a, a, 0.0), std::invalid_argument);
}

TEST_CASE("ssim of identical images is 1") {
    RandomSource rng(2);
    const RealImage a = gaussian_image(rng, 16, 16);
    REQUIRE_THAT(ssim(a, a, 1.0), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("ssim is symmetric") {
    RandomSource rng(3);
    const RealImage a = gaussian_image(rng, 16, 16);
    const RealImage b = gaussian_image(rng, 16, 16);
    REQUIRE_THAT(ssim(a, b, 1.0), Catch::Matchers::WithinAbs(ssim(b, a, 1.0), 1e-12));
}

TEST_CASE("ssim of constant images with an offset matches the one-window formula") {
    const double base = 0.3, offset = 0.4;
    const RealImage a(16, 16, base);
    const RealImage b(16, 16, base + offset);
    // constant windows: variances vanish, only the luminance term remains
    const double c1 = 0.01 * 0.01;
    const double expect =
        (2.0 * base * (base + offset) + c1) / (base * base + (base + offset) * (base + offset) + c1);
    const double got = ssim(a, b, 1.0);
    REQUIRE_THAT(got, Catch::Matchers::WithinAbs(expect, 1e-12));
    REQUIRE(got < 1.0);
}

TEST_CASE("ssim stays within [-1, 1] on random pairs") {
    RandomSource rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const RealImage a = gaussian_image(rng, 12, 12);
        const RealImage b = gaussian_image(rng, 12, 12);
        const double v = ssim(a, b, 1.0);
        REQUIRE(v >= -1.0);
        REQUIRE(v <= 1.0);
        REQUIRE(v < 1.0);  // independent noise is never a perfect match
    }
}

TEST_CASE("ssim rejects images smaller than the window") {
    const RealImage a(5, 5, 0.0);
    REQUIRE_THROWS_AS(ssim(a, a, 1.0), std::invalid_argument);
}

TEST_CASE("gaussian-window ssim agrees with uniform on identical inputs") {
    RandomSource rng(5);
    const RealImage a = gaussian_image(rng, 16, 16);
    SsimOptions opt;
    opt.gaussian = true;
    REQUIRE_THAT(ssim(a, a, 1.0, opt), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("evaluate_batch aggregates mean and population std") {
    const RealImage ref(10, 10, 0.5);
    RealImage e1 = ref, e2 = ref;
    for (double& v : e1.data) v += 0.1;                  // PSNR 20
    for (double& v : e2.data) v += 0.1 / std::sqrt(10);  // PSNR 30
    const MetricReport r = evaluate_batch({{ref, e1}, {ref, e2}}, 1.0);
    REQUIRE(r.count() == 2);
    REQUIRE_THAT(r.psnr_mean, Catch::Matchers::WithinAbs(25.0, 1e-6));
    REQUIRE_THAT(r.psnr_std, Catch::Matchers::WithinAbs(5.0, 1e-6));
}

TEST_CASE("evaluate_batch of a single pair has zero std") {
    const RealImage ref(10, 10, 0.5);
    RealImage t = ref;
    for (double& v : t.data) v += 0.2;
    const MetricReport r = evaluate_batch({{ref, t}}, 1.0);
    REQUIRE(r.psnr_std == 0.0);
    REQUIRE(r.ssim_std == 0.0);
}

TEST_CASE("evaluate_batch of identical pairs: ssim mean 1, std 0, psnr sentinel") {
    RandomSource rng(6);
    const RealImage a = gaussian_image(rng, 16, 16);
    const MetricReport r = evaluate_batch({{a, a}, {a, a}, {a, a}}, 1.0);
    REQUIRE_THAT(r.ssim_mean, Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE(r.ssim_std == 0.0);
    REQUIRE(std::isinf(r.psnr_mean));
    REQUIRE(r.psnr_std == 0.0);
}

TEST_CASE("evaluate_batch is permutation-invariant") {
    RandomSource rng(7);
    std::vector<std::pair<RealImage, RealImage>> pairs;
    for (int i = 0; i < 5; ++i)
        pairs.emplace_back(gaussian_image(rng, 12, 12), gaussian_image(rng, 12, 12));
    const MetricReport fwd = evaluate_batch(pairs, 1.0);
    std::reverse(pairs.begin(), pairs.end());
    const MetricReport rev = evaluate_batch(pairs, 1.0);
    REQUIRE_THAT(fwd.psnr_mean, Catch::Matchers::WithinAbs(rev.psnr_mean, 1e-12));
    REQUIRE_THAT(fwd.ssim_mean, Catch::Matchers::WithinAbs(rev.ssim_mean, 1e-12));
    REQUIRE_THAT(fwd.psnr_std, Catch::Matchers::WithinAbs(rev.psnr_std, 1e-12));
}

TEST_CASE("evaluate_batch rejects empty input") {
    REQUIRE_THROWS_AS(evaluate_batch({}, 1.0), std::invalid_argument);
}
