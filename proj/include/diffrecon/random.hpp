#pragma once

#include <cmath>
#include <cstdint>

#include "diffrecon/image.hpp"

namespace diffrecon {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Deterministic counter-based random source. The generator is fully
/// specified here (splitmix64 stream + Box-Muller), so sequences are
/// byte-identical for a given seed on every platform and toolchain.
/// Single-owner: fork() derives independent child streams instead of
/// sharing one source across tasks.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1].
    double uniform_open() { return 1.0 - uniform(); }

    /// Uniform integer in [0, n). n = 0 is rejected.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("RandomSource::next_below: n must be positive");
        // Rejection sampling keeps the distribution exactly uniform.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal draw (Box-Muller, cached spare).
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Child source derived from the original seed and a stream id;
    /// independent of how much this source has been consumed.
    RandomSource fork(std::uint64_t stream) const {
        std::uint64_t s = seed_ ^ (0xD2B74407B1CE6E93ULL * (stream + 1));
        return RandomSource(detail::splitmix64(s));
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// h-by-w image of i.i.d. standard normal entries.
inline RealImage gaussian_image(RandomSource& rng, int h, int w) {
    RealImage img(h, w);
    for (double& v : img.data) v = rng.normal();
    return img;
}

}  // namespace diffrecon
