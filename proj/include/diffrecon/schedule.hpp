#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "diffrecon/image.hpp"
#include "diffrecon/random.hpp"

namespace diffrecon {

/// Variance schedule beta_t with the derived alpha_t = 1 - beta_t and the
/// running product alpha_bar. alpha_bar(0) = 1 by definition; alpha_bar(t)
/// equals alpha_bar(t-1) * alpha(t) exactly because it is built that way.
/// Indices follow the 1-based timestep convention throughout.
class NoiseSchedule {
public:
    NoiseSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
        if (beta_.empty()) throw std::invalid_argument("NoiseSchedule: empty beta array");
        alpha_.resize(beta_.size());
        alpha_bar_.resize(beta_.size() + 1);
        alpha_bar_[0] = 1.0;
        double prev = 0.0;
        for (std::size_t i = 0; i < beta_.size(); ++i) {
            if (!(beta_[i] > 0.0 && beta_[i] < 1.0))
                throw std::invalid_argument("NoiseSchedule: beta must lie strictly inside (0,1)");
            if (beta_[i] < prev)
                throw std::invalid_argument("NoiseSchedule: beta must be non-decreasing");
            prev = beta_[i];
            alpha_[i] = 1.0 - beta_[i];
            alpha_bar_[i + 1] = alpha_bar_[i] * alpha_[i];
        }
    }

    int T() const { return static_cast<int>(beta_.size()); }

    double beta(int t) const { return beta_[check(t) - 1]; }
    double alpha(int t) const { return alpha_[check(t) - 1]; }

    /// Valid for t in [0, T].
    double alpha_bar(int t) const {
        if (t < 0 || t > T()) throw std::out_of_range("NoiseSchedule::alpha_bar: t out of range");
        return alpha_bar_[t];
    }

private:
    int check(int t) const {
        if (t < 1 || t > T()) throw std::out_of_range("NoiseSchedule: t out of range");
        return t;
    }

    std::vector<double> beta_;
    std::vector<double> alpha_;
    std::vector<double> alpha_bar_;
};

/// beta_t linearly interpolated from beta_start to beta_end inclusive.
inline NoiseSchedule linear_beta_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("linear_beta_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("linear_beta_schedule: need 0 < beta_start <= beta_end < 1");
    std::vector<double> betas(T);
    if (T == 1) {
        betas[0] = beta_start;
    } else {
        for (int i = 0; i < T; ++i)
            betas[i] = beta_start + (beta_end - beta_start) * i / static_cast<double>(T - 1);
    }
    return NoiseSchedule(std::move(betas));
}

/// Closed-form forward diffusion y_t = sqrt(alpha_bar_t) y0 + sqrt(1 - alpha_bar_t) eps.
inline RealImage forward_diffuse(const NoiseSchedule& s, const RealImage& y0, int t,
                                 const RealImage& eps) {
    if (t < 1 || t > s.T()) throw std::out_of_range("forward_diffuse: t out of range");
    if (!y0.same_shape(eps)) throw std::invalid_argument("forward_diffuse: shape mismatch");
    const double a = std::sqrt(s.alpha_bar(t));
    const double b = std::sqrt(1.0 - s.alpha_bar(t));
    RealImage out(y0.height, y0.width);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a * y0.data[i] + b * eps.data[i];
    return out;
}

/// Draw from the piecewise training distribution
///   p(alpha_bar) = sum_t (1/T) U(alpha_bar_t, alpha_bar_{t-1}).
/// Returns the continuous alpha_bar together with its interval index t.
inline std::pair<double, int> sample_alpha_bar(const NoiseSchedule& s, RandomSource& rng) {
    const int t = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(s.T())));
    const double lo = s.alpha_bar(t);
    const double hi = s.alpha_bar(t - 1);
    double u;
    do {
        u = rng.uniform();
    } while (u == 0.0);  // keep the interval open at lo
    return {lo + u * (hi - lo), t};
}

/// Mean and variance of the tractable posterior q(y_{t-1} | y0, y_t).
inline std::pair<RealImage, double> posterior_params(const NoiseSchedule& s, const RealImage& y0,
                                                     const RealImage& yt, int t) {
    if (t < 1 || t > s.T()) throw std::out_of_range("posterior_params: t out of range");
    if (!y0.same_shape(yt)) throw std::invalid_argument("posterior_params: shape mismatch");
    if (t == 1) {
        // alpha_bar_0 = 1 collapses the posterior onto y0 with zero variance.
        return {y0, 0.0};
    }
    const double ab_t = s.alpha_bar(t);
    const double ab_prev = s.alpha_bar(t - 1);
    const double coef_yt = std::sqrt(s.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab_t);
    const double coef_y0 = std::sqrt(ab_prev) * s.beta(t) / (1.0 - ab_t);
    RealImage mu(y0.height, y0.width);
    for (std::size_t i = 0; i < mu.data.size(); ++i)
        mu.data[i] = coef_yt * yt.data[i] + coef_y0 * y0.data[i];
    const double sigma2 = s.beta(t) * (1.0 - ab_prev) / (1.0 - ab_t);
    return {std::move(mu), sigma2};
}

}  // namespace diffrecon
