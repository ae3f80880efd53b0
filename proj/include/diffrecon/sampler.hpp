#pragma once

#include <chrono>
#include <cstdint>
#include <utility>
#include <vector>

#include "diffrecon/denoiser.hpp"
#include "diffrecon/forward_model.hpp"
#include "diffrecon/schedule.hpp"

namespace diffrecon {

/// Reverse-process configuration. dc_step is the data-consistency step size
/// of the k-space correction (the paper's DC weight, kept separate from the
/// network parameters).
struct SamplerConfig {
    NoiseSchedule schedule;
    double dc_step = 1.0;
    bool enable_dc = true;
    std::uint64_t seed = 0;
    bool record_trajectory = false;

    void validate() const {
        if (dc_step < 0.0 || dc_step > 1.0)
            throw std::invalid_argument("SamplerConfig: dc_step must be in [0,1]");
    }
};

/// Closed-form inversion of the forward process given a noise estimate:
///   y0_hat = (y_t - sqrt(1 - alpha_bar) * eps_hat) / sqrt(alpha_bar).
inline RealImage estimate_y0_from_noise(const RealImage& y_t, const RealImage& eps_hat,
                                        double alpha_bar) {
    if (!y_t.same_shape(eps_hat)) throw std::invalid_argument("estimate_y0: shape mismatch");
    if (!(alpha_bar > 0.0 && alpha_bar <= 1.0))
        throw std::invalid_argument("estimate_y0: alpha_bar must lie in (0,1]");
    const double inv_a = 1.0 / std::sqrt(alpha_bar);
    const double b = std::sqrt(1.0 - alpha_bar);
    RealImage out(y_t.height, y_t.width);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = inv_a * (y_t.data[i] - b * eps_hat.data[i]);
    return out;
}

inline RealImage estimate_y0(const DenoiserParams& params, const RealImage& x_cond,
                             const RealImage& y_t, double alpha_bar_t) {
    return estimate_y0_from_noise(y_t, predict_noise(params, x_cond, y_t, alpha_bar_t),
                                  alpha_bar_t);
}

namespace detail {

struct StepCoefficients {
    double inv_sqrt_alpha;
    double noise_coef;   // (1 - alpha_t) / sqrt(1 - alpha_bar_t)
    double sigma;        // sqrt(beta_t)
};

inline StepCoefficients step_coefficients(const NoiseSchedule& s, int t) {
    StepCoefficients c;
    c.inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
    c.noise_coef = (1.0 - s.alpha(t)) / std::sqrt(1.0 - s.alpha_bar(t));
    c.sigma = std::sqrt(s.beta(t));
    return c;
}

/// The elementwise refinement shared by both samplers, so the real channel
/// of the DC sampler is bit-identical to the plain sampler's update.
inline void refine_inplace(std::vector<double>& y, const std::vector<double>& eps_hat,
                           const std::vector<double>* z, const StepCoefficients& c) {
    if (z) {
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] = c.inv_sqrt_alpha * (y[i] - c.noise_coef * eps_hat[i]) + c.sigma * (*z)[i];
    } else {
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] = c.inv_sqrt_alpha * (y[i] - c.noise_coef * eps_hat[i]);
    }
}

}  // namespace detail

/// One reverse refinement (Gaussian transition mean plus sqrt(beta_t) z).
/// z must be zero at t = 1.
inline RealImage reverse_step(const DenoiserParams& params, const RealImage& x_cond,
                              const RealImage& y_t, int t, const NoiseSchedule& schedule,
                              const RealImage& z) {
    if (t < 1 || t > schedule.T()) throw std::out_of_range("reverse_step: t out of range");
    if (!y_t.same_shape(z)) throw std::invalid_argument("reverse_step: z shape mismatch");
    if (t == 1) {
        for (double v : z.data)
            if (v != 0.0) throw std::invalid_argument("reverse_step: z must be zero at t = 1");
    }
    const RealImage eps_hat = predict_noise(params, x_cond, y_t, schedule.alpha_bar(t));
    const auto c = detail::step_coefficients(schedule, t);
    RealImage out = y_t;
    detail::refine_inplace(out.data, eps_hat.data, &z.data, c);
    return out;
}

/// Plain conditional sampling: T iterative refinements from pure noise.
inline RealImage sample_plain(const DenoiserParams& params, const RealImage& x_cond,
                              const SamplerConfig& config) {
    config.validate();
    const NoiseSchedule& s = config.schedule;
    RandomSource rng(config.seed);
    RealImage y = gaussian_image(rng, x_cond.height, x_cond.width);

    for (int t = s.T(); t >= 1; --t) {
        const RealImage z = t > 1 ? gaussian_image(rng, y.height, y.width)
                                  : RealImage(y.height, y.width, 0.0);
        const RealImage eps_hat = predict_noise(params, x_cond, y, s.alpha_bar(t));
        detail::refine_inplace(y.data, eps_hat.data, &z.data, detail::step_coefficients(s, t));
    }
    return y;
}

struct DcSampleResult {
    RealImage image;          // real part of the final DC-corrected state
    ComplexImage final_state; // complex final state (exact measurement consistency lives here)
    std::vector<double> residual_before_dc;  // filled when record_trajectory
    std::vector<double> residual_after_dc;
};

/// Data-consistency-enforced sampling: each iteration applies the reverse
/// refinement and then the k-space correction y' = y - dc_step A*(A y - b).
/// The state is carried as a complex image; the denoiser sees its real part
/// and the real part is returned, so the per-step residual contraction is
/// exact in the complex domain.
inline DcSampleResult sample_dc(const DenoiserParams& params, const RealImage& x_cond,
                                const KSpaceMeasurement& b, const SamplerConfig& config) {
    config.validate();
    if (!config.enable_dc)
        throw std::invalid_argument("sample_dc: enable_dc is false; use sample_plain");
    if (b.mask.height != x_cond.height || b.mask.width != x_cond.width)
        throw std::invalid_argument("sample_dc: mask/condition shape mismatch");

    const NoiseSchedule& s = config.schedule;
    const MeasurementOp op(b.mask);
    RandomSource rng(config.seed);

    RealImage yr = gaussian_image(rng, x_cond.height, x_cond.width);
    RealImage yi(x_cond.height, x_cond.width, 0.0);

    DcSampleResult result;
    for (int t = s.T(); t >= 1; --t) {
        const RealImage z = t > 1 ? gaussian_image(rng, yr.height, yr.width)
                                  : RealImage(yr.height, yr.width, 0.0);
        const RealImage eps_hat = predict_noise(params, x_cond, yr, s.alpha_bar(t));
        const auto c = detail::step_coefficients(s, t);
        detail::refine_inplace(yr.data, eps_hat.data, &z.data, c);
        for (double& v : yi.data) v *= c.inv_sqrt_alpha;  // noise and eps_hat are real

        if (config.dc_step > 0.0) {
            ComplexImage y(yr.height, yr.width);
            for (std::size_t i = 0; i < y.data.size(); ++i)
                y.data[i] = {yr.data[i], yi.data[i]};
            if (config.record_trajectory)
                result.residual_before_dc.push_back(residual_norm(op, y, b));
            y = dc_update_complex(op, y, b, config.dc_step);
            if (config.record_trajectory)
                result.residual_after_dc.push_back(residual_norm(op, y, b));
            for (std::size_t i = 0; i < y.data.size(); ++i) {
                yr.data[i] = y.data[i].real();
                yi.data[i] = y.data[i].imag();
            }
        } else if (config.record_trajectory) {
            ComplexImage y(yr.height, yr.width);
            for (std::size_t i = 0; i < y.data.size(); ++i)
                y.data[i] = {yr.data[i], yi.data[i]};
            const double r = residual_norm(op, y, b);
            result.residual_before_dc.push_back(r);
            result.residual_after_dc.push_back(r);
        }
    }

    result.final_state = ComplexImage(yr.height, yr.width);
    for (std::size_t i = 0; i < yr.data.size(); ++i)
        result.final_state.data[i] = {yr.data[i], yi.data[i]};
    result.image = std::move(yr);
    return result;
}

/// Reconstruction report: effective configuration echo plus run statistics.
struct ReconReport {
    int total_steps = 0;
    double wall_seconds = 0.0;
    bool dc_enabled = false;
    double dc_step = 0.0;
    std::uint64_t seed = 0;
    bool record_trajectory = false;
    int schedule_T = 0;
    double beta_first = 0.0, beta_last = 0.0;
    double final_residual = 0.0;  // complex-domain ||A y - b|| of the output state
    std::vector<double> residual_before_dc;
    std::vector<double> residual_after_dc;
};

struct ReconResult {
    RealImage image;
    ReconReport report;
};

/// End-to-end reconstruction: zero-filled conditioning image, then the
/// configured sampler.
inline ReconResult reconstruct(const DenoiserParams& params, const KSpaceMeasurement& b,
                               const SamplerConfig& config) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const MeasurementOp op(b.mask);
    const RealImage x_cond = zero_fill(op, b);

    ReconResult result;
    if (config.enable_dc) {
        DcSampleResult s = sample_dc(params, x_cond, b, config);
        result.image = std::move(s.image);
        result.report.final_residual = residual_norm(op, s.final_state, b);
        result.report.residual_before_dc = std::move(s.residual_before_dc);
        result.report.residual_after_dc = std::move(s.residual_after_dc);
    } else {
        result.image = sample_plain(params, x_cond, config);
        result.report.final_residual = residual_norm(op, result.image, b);
    }

    const auto t1 = std::chrono::steady_clock::now();
    ReconReport& r = result.report;
    r.total_steps = config.schedule.T();
    r.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    r.dc_enabled = config.enable_dc;
    r.dc_step = config.dc_step;
    r.seed = config.seed;
    r.record_trajectory = config.record_trajectory;
    r.schedule_T = config.schedule.T();
    r.beta_first = config.schedule.beta(1);
    r.beta_last = config.schedule.beta(config.schedule.T());
    return result;
}

}  // namespace diffrecon
