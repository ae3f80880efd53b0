#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "diffrecon/random.hpp"

namespace diffrecon {

enum class MaskPattern { G1D, G2D, Uniform1D, Poisson };

inline const char* mask_pattern_name(MaskPattern p) {
    switch (p) {
        case MaskPattern::G1D: return "g1d";
        case MaskPattern::G2D: return "g2d";
        case MaskPattern::Uniform1D: return "uniform1d";
        case MaskPattern::Poisson: return "poisson";
    }
    return "?";
}

inline MaskPattern mask_pattern_from_name(const std::string& name) {
    if (name == "g1d") return MaskPattern::G1D;
    if (name == "g2d") return MaskPattern::G2D;
    if (name == "uniform1d" || name == "uniform") return MaskPattern::Uniform1D;
    if (name == "poisson") return MaskPattern::Poisson;
    throw std::invalid_argument("unknown mask pattern: " + name);
}

/// Tunables the paper leaves unspecified. All generators take these; the
/// defaults give visibly center-weighted masks at the usual accelerations.
struct MaskConfig {
    double center_fraction = 0.04;    // fully sampled central share per axis
    double g1d_sigma_frac = 1.0 / 6;  // column profile sigma = w * frac
    double g2d_sigma_frac = 1.0 / 6;  // isotropic sigma = min(h, w) * frac
    double poisson_tolerance = 0.2;   // accepted |fraction - 1/R| / (1/R)
    int poisson_max_attempts = 48;
};

/// Boolean k-space sampling pattern P. keep[y*w + x] is true where the
/// frequency is acquired.
struct SamplingMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> keep;
    MaskPattern pattern = MaskPattern::G1D;
    double acceleration = 1.0;
    std::uint64_t seed = 0;

    bool at(int y, int x) const { return keep[static_cast<std::size_t>(y) * width + x] != 0; }
    std::size_t count() const {
        std::size_t c = 0;
        for (auto v : keep) c += v != 0;
        return c;
    }
};

inline double sampled_fraction(const SamplingMask& mask) {
    return static_cast<double>(mask.count()) / (static_cast<double>(mask.height) * mask.width);
}

namespace detail {

/// Central always-sampled index range [lo, hi) for one axis.
inline std::pair<int, int> center_range(int n, double fraction) {
    const int c = n / 2;
    const int half = std::max(1, static_cast<int>(std::ceil(fraction * n / 2.0)));
    return {std::max(0, c - half), std::min(n, c + half)};
}

inline void validate_mask_args(int h, int w, double accel) {
    if (h < 1 || w < 1) throw std::invalid_argument("mask: dimensions must be positive");
    if (accel < 1.0) throw std::invalid_argument("mask: acceleration must be >= 1");
}

inline SamplingMask full_mask(int h, int w, MaskPattern pattern, double accel, std::uint64_t seed) {
    SamplingMask m;
    m.height = h;
    m.width = w;
    m.keep.assign(static_cast<std::size_t>(h) * w, 1);
    m.pattern = pattern;
    m.acceleration = accel;
    m.seed = seed;
    return m;
}

}  // namespace detail

/// Gaussian 1D: full phase-encode columns, chosen by weighted sampling
/// without replacement under a Gaussian profile about the k-space center.
/// The kept-column budget round(w/R) includes the forced center block, so
/// the realized fraction is 1/R up to rounding.
inline SamplingMask gen_g1d(int h, int w, double accel, std::uint64_t seed,
                            const MaskConfig& cfg = {}) {
    detail::validate_mask_args(h, w, accel);
    if (accel > w) throw std::invalid_argument("gen_g1d: acceleration exceeds width");
    if (accel == 1.0) return detail::full_mask(h, w, MaskPattern::G1D, accel, seed);

    const auto [lo, hi] = detail::center_range(w, cfg.center_fraction);
    const int n_center = hi - lo;
    const int budget = std::max(n_center, static_cast<int>(std::lround(w / accel)));

    std::vector<std::uint8_t> col_keep(w, 0);
    for (int x = lo; x < hi; ++x) col_keep[x] = 1;

    const double sigma = cfg.g1d_sigma_frac * w;
    const double cx = w / 2;
    std::vector<double> weight(w, 0.0);
    for (int x = 0; x < w; ++x)
        if (!col_keep[x]) weight[x] = std::exp(-0.5 * (x - cx) * (x - cx) / (sigma * sigma));

    RandomSource rng(seed);
    for (int drawn = n_center; drawn < budget; ++drawn) {
        double total = 0.0;
        for (double v : weight) total += v;
        if (total <= 0.0) break;
        double u = rng.uniform() * total;
        int pick = -1;
        for (int x = 0; x < w; ++x) {
            u -= weight[x];
            if (u < 0.0) {
                pick = x;
                break;
            }
        }
        if (pick < 0) {  // numerical edge of the cumulative scan
            for (int x = w - 1; x >= 0; --x)
                if (weight[x] > 0.0) {
                    pick = x;
                    break;
                }
        }
        col_keep[pick] = 1;
        weight[pick] = 0.0;
    }

    SamplingMask m;
    m.height = h;
    m.width = w;
    m.keep.assign(static_cast<std::size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.keep[static_cast<std::size_t>(y) * w + x] = col_keep[x];
    m.pattern = MaskPattern::G1D;
    m.acceleration = accel;
    m.seed = seed;
    return m;
}

/// Gaussian 2D: pointwise Bernoulli under an isotropic Gaussian density,
/// rescaled so the expected fraction (center block included) is 1/R.
/// Draws are consumed in row-major order independent of R, so masks at two
/// accelerations from one seed are nested.
inline SamplingMask gen_g2d(int h, int w, double accel, std::uint64_t seed,
                            const MaskConfig& cfg = {}) {
    detail::validate_mask_args(h, w, accel);
    if (accel == 1.0) return detail::full_mask(h, w, MaskPattern::G2D, accel, seed);

    const auto [ylo, yhi] = detail::center_range(h, cfg.center_fraction);
    const auto [xlo, xhi] = detail::center_range(w, cfg.center_fraction);
    const auto in_center = [&](int y, int x) { return y >= ylo && y < yhi && x >= xlo && x < xhi; };

    const double sigma = cfg.g2d_sigma_frac * std::min(h, w);
    const double cy = h / 2, cx = w / 2;
    std::vector<double> density(static_cast<std::size_t>(h) * w, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (!in_center(y, x))
                density[static_cast<std::size_t>(y) * w + x] =
                    std::exp(-0.5 * ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (sigma * sigma));

    const double n_center = static_cast<double>(yhi - ylo) * (xhi - xlo);
    const double target = static_cast<double>(h) * w / accel - n_center;

    // Bisection on the density scale; clamping at probability 1 makes the
    // expected count monotone but not linear in the scale.
    double s_lo = 0.0, s_hi = 1.0;
    const auto expected = [&](double s) {
        double e = 0.0;
        for (double d : density) e += std::min(1.0, s * d);
        return e;
    };
    while (expected(s_hi) < target && s_hi < 1e12) s_hi *= 2.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (s_lo + s_hi);
        (expected(mid) < target ? s_lo : s_hi) = mid;
    }
    const double s = 0.5 * (s_lo + s_hi);

    SamplingMask m;
    m.height = h;
    m.width = w;
    m.keep.assign(static_cast<std::size_t>(h) * w, 0);
    RandomSource rng(seed);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (in_center(y, x)) {
                m.keep[i] = 1;
                continue;
            }
            const double u = rng.uniform();  // drawn for every point, every R
            if (u < std::min(1.0, s * density[i])) m.keep[i] = 1;
        }
    m.pattern = MaskPattern::G2D;
    m.acceleration = accel;
    m.seed = seed;
    return m;
}

/// Uniform 1D: exactly floor(w / ceil(R)) equally spaced columns at a random
/// offset, plus the always-sampled center block.
inline SamplingMask gen_uniform1d(int h, int w, double accel, std::uint64_t seed,
                                  const MaskConfig& cfg = {}) {
    detail::validate_mask_args(h, w, accel);
    if (accel > w) throw std::invalid_argument("gen_uniform1d: acceleration exceeds width");
    if (accel == 1.0) return detail::full_mask(h, w, MaskPattern::Uniform1D, accel, seed);

    const int spacing = static_cast<int>(std::ceil(accel));
    const int count = w / spacing;
    RandomSource rng(seed);
    const int offset = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(spacing)));

    std::vector<std::uint8_t> col_keep(w, 0);
    for (int i = 0; i < count; ++i) col_keep[offset + i * spacing] = 1;
    const auto [lo, hi] = detail::center_range(w, cfg.center_fraction);
    for (int x = lo; x < hi; ++x) col_keep[x] = 1;

    SamplingMask m;
    m.height = h;
    m.width = w;
    m.keep.assign(static_cast<std::size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.keep[static_cast<std::size_t>(y) * w + x] = col_keep[x];
    m.pattern = MaskPattern::Uniform1D;
    m.acceleration = accel;
    m.seed = seed;
    return m;
}

/// Raised when the Poisson-disc search cannot land inside the fraction band.
struct MaskGenerationError : std::runtime_error {
    double achieved_fraction;
    MaskGenerationError(const std::string& msg, double achieved)
        : std::runtime_error(msg), achieved_fraction(achieved) {}
};

/// Variable-density Poisson-disc: dart throwing with an exclusion radius that
/// grows with distance from the k-space center. The radius scale is tuned by
/// bisection until the sampled fraction reaches 1/R within tolerance.
inline SamplingMask gen_poisson(int h, int w, double accel, std::uint64_t seed,
                                const MaskConfig& cfg = {}) {
    detail::validate_mask_args(h, w, accel);
    if (accel == 1.0) return detail::full_mask(h, w, MaskPattern::Poisson, accel, seed);

    const auto [ylo, yhi] = detail::center_range(h, cfg.center_fraction);
    const auto [xlo, xhi] = detail::center_range(w, cfg.center_fraction);
    const auto in_center = [&](int y, int x) { return y >= ylo && y < yhi && x >= xlo && x < xhi; };

    const double cy = h / 2, cx = w / 2;
    const double d_max = std::sqrt(cy * cy + cx * cx);
    const auto local_radius = [&](double scale, int y, int x) {
        const double d = std::sqrt((y - cy) * (y - cy) + (x - cx) * (x - cx)) / d_max;
        return scale * (1.0 + 3.0 * d);
    };

    const std::size_t n_total = static_cast<std::size_t>(h) * w;
    const double target = n_total / accel;
    RandomSource rng(seed);

    // One dart-throwing pass at a fixed radius scale; returns the mask grid.
    const auto throw_darts = [&](double scale) {
        std::vector<std::uint8_t> keep(n_total, 0);
        struct Pt {
            int y, x;
            double r;
        };
        const double r_max = scale * 4.0;
        const int cell = std::max(1, static_cast<int>(std::floor(r_max)));
        const int gh = (h + cell - 1) / cell, gw = (w + cell - 1) / cell;
        std::vector<std::vector<Pt>> grid(static_cast<std::size_t>(gh) * gw);
        const auto accept = [&](int y, int x, bool check) {
            const double r = local_radius(scale, y, x);
            if (check) {
                const int gy = y / cell, gx = x / cell;
                const int reach = 1;
                for (int by = std::max(0, gy - reach); by <= std::min(gh - 1, gy + reach); ++by)
                    for (int bx = std::max(0, gx - reach); bx <= std::min(gw - 1, gx + reach); ++bx)
                        for (const Pt& p : grid[static_cast<std::size_t>(by) * gw + bx]) {
                            const double rr = std::min(r, p.r);
                            const double dy = y - p.y, dx = x - p.x;
                            if (dy * dy + dx * dx < rr * rr) return false;
                        }
            }
            keep[static_cast<std::size_t>(y) * w + x] = 1;
            grid[static_cast<std::size_t>(y / cell) * gw + x / cell].push_back({y, x, r});
            return true;
        };
        for (int y = ylo; y < yhi; ++y)
            for (int x = xlo; x < xhi; ++x) accept(y, x, false);
        std::vector<std::uint32_t> order;
        order.reserve(n_total);
        for (std::uint32_t i = 0; i < n_total; ++i) {
            const int y = static_cast<int>(i) / w, x = static_cast<int>(i) % w;
            if (!in_center(y, x)) order.push_back(i);
        }
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.next_below(i)]);
        for (std::uint32_t i : order) accept(static_cast<int>(i) / w, static_cast<int>(i) % w, true);
        return keep;
    };

    const auto count_of = [&](const std::vector<std::uint8_t>& keep) {
        std::size_t c = 0;
        for (auto v : keep) c += v != 0;
        return static_cast<double>(c);
    };

    double s_lo = 0.05, s_hi = 0.5 * std::min(h, w);
    std::vector<std::uint8_t> best;
    double best_err = 1e300, best_count = 0.0;
    for (int attempt = 0; attempt < cfg.poisson_max_attempts; ++attempt) {
        const double scale = 0.5 * (s_lo + s_hi);
        auto keep = throw_darts(scale);
        const double c = count_of(keep);
        const double err = std::abs(c - target) / target;
        if (err < best_err) {
            best_err = err;
            best_count = c;
            best = std::move(keep);
        }
        if (best_err <= 0.05) break;
        (c > target ? s_lo : s_hi) = scale;  // larger radius -> fewer points
    }

    const double achieved = best_count / static_cast<double>(n_total);
    if (best_err > cfg.poisson_tolerance)
        throw MaskGenerationError(
            "gen_poisson: could not reach fraction 1/" + std::to_string(accel) +
                " (achieved " + std::to_string(achieved) + ")",
            achieved);

    SamplingMask m;
    m.height = h;
    m.width = w;
    m.keep = std::move(best);
    m.pattern = MaskPattern::Poisson;
    m.acceleration = accel;
    m.seed = seed;
    return m;
}

inline SamplingMask generate_mask(MaskPattern pattern, int h, int w, double accel,
                                  std::uint64_t seed, const MaskConfig& cfg = {}) {
    switch (pattern) {
        case MaskPattern::G1D: return gen_g1d(h, w, accel, seed, cfg);
        case MaskPattern::G2D: return gen_g2d(h, w, accel, seed, cfg);
        case MaskPattern::Uniform1D: return gen_uniform1d(h, w, accel, seed, cfg);
        case MaskPattern::Poisson: return gen_poisson(h, w, accel, seed, cfg);
    }
    throw std::invalid_argument("generate_mask: bad pattern");
}

}  // namespace diffrecon
